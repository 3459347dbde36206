"""Transition tables, resonance fields, CW-EPR spectra and transmission maps."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .constants import KB_MHZ_PER_K
from .hamiltonian import build_hamiltonian
from .qudit import drive_operator
from .spinops import product_space


class ZeroReference(ValueError):
    pass


INTENSITY_MODELS = ("rabi", "splus")


def boltzmann_populations(energies, temperature):
    """Populations (last axis) with energies in MHz, shifted for overflow safety."""
    if not np.all(np.asarray(temperature) > 0):
        raise ValueError("temperature must be positive")
    e = np.asarray(energies, dtype=float)
    kt = KB_MHZ_PER_K * np.asarray(temperature, dtype=float)
    x = -(e - e.min(axis=-1, keepdims=True)) / np.expand_dims(kt, -1)
    w = np.exp(x)
    return w / w.sum(axis=-1, keepdims=True)


def transverse_axes(direction):
    """Two unit vectors perpendicular to ``direction`` (stackable over ``(..., 3)``)."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    # pick the Cartesian axis least aligned with u as a seed
    seed = np.zeros_like(u)
    idx = np.argmin(np.abs(u), axis=-1)
    np.put_along_axis(seed, idx[..., None], 1.0, axis=-1)
    a = np.cross(u, seed)
    a /= np.linalg.norm(a, axis=-1, keepdims=True)
    b = np.cross(u, a)
    return a, b


def _pair_omega2(vectors, drives):
    """Mean over drive operators of Omega_ij^2 = 4|<i|V|j>|^2, shape (..., d, d)."""
    total = 0.0
    for v_op in drives:
        m = linalg.operator_in_basis(v_op, vectors)
        total = total + 4.0 * np.abs(m) ** 2
    return total / len(drives)


def _transverse_drives(p, direction, b_mw):
    """Drive operators along the two axes perpendicular to each field direction."""
    return [drive_operator(p, u, b_mw) for u in transverse_axes(direction)]


@dataclass(frozen=True)
class TransitionRecord:
    lower_index: int  # 1-based, energy sorted
    upper_index: int
    frequency: float  # MHz
    rabi: float  # MHz
    intensity: float


def transition_table(energies, vectors, drive, temperature):
    """All d(d-1)/2 transitions with thermal weight (p_lower - p_upper) * rabi^2.

    ``drive`` is a drive operator (MHz) or a sequence of them; in the latter
    case rabi^2 is averaged over the sequence.
    """
    drives = [drive] if np.ndim(drive) == 2 else list(drive)
    w = np.asarray(energies, dtype=float)
    pop = boltzmann_populations(w, temperature)
    om2 = _pair_omega2(np.asarray(vectors), drives)
    d = w.size
    out = []
    for i in range(d - 1):
        for j in range(i + 1, d):
            r2 = float(om2[i, j])
            out.append(
                TransitionRecord(i + 1, j + 1, float(w[j] - w[i]), float(np.sqrt(r2)),
                                 float((pop[i] - pop[j]) * r2))
            )
    return out


# ------------------------------------------------------------ resonance fields


@dataclass(frozen=True)
class ResonanceLine:
    field: float  # T
    record: TransitionRecord
    orientation: int = 0


@dataclass(frozen=True)
class ResonanceSettings:
    step: float = 5e-4  # T, scan step
    freq_tol: float = 1e-4  # MHz, refinement target |f - nu|
    field_tol: float = 1e-12  # T, bracket width at which refinement stops
    max_refine: int = 200
    temperature: float = 295.0  # K
    b_mw: float = 1e-3  # T, only scales the intensities
    intensity_model: str = "rabi"
    min_relative_intensity: float = 0.0  # drop weaker pairs before refinement
    chunk: int = 64  # orientations diagonalised together


def _intensity_weights(p, w, v, dirs, temperature, b_mw, model):
    """Thermal weight for every pair, shape (..., d, d), using transverse drives."""
    pop = boltzmann_populations(w, temperature)
    dp = pop[..., :, None] - pop[..., None, :]
    if model == "rabi":
        om2 = _pair_omega2(v, _transverse_drives(p, dirs, b_mw))
    elif model == "splus":
        ops = product_space(p.s, p.i)
        m = linalg.operator_in_basis(ops.sx + 1j * ops.sy, v)
        om2 = np.abs(m) ** 2 + np.abs(np.swapaxes(m, -1, -2)) ** 2
    else:
        raise ValueError(f"intensity model must be one of {INTENSITY_MODELS}")
    return dp * om2, om2


def _refine_roots(p, dirs, lo, hi, glo, ghi, ii, jj, nu, s):
    """Safeguarded false position (Illinois) on f_ij(B) - nu for a batch of brackets."""
    lo, hi, glo, ghi = lo.copy(), hi.copy(), glo.copy(), ghi.copy()
    x = lo.copy()
    gx = glo.copy()
    side = np.zeros(lo.size, dtype=int)
    done = np.zeros(lo.size, dtype=bool)
    for _ in range(s.max_refine):
        act = ~done
        if not act.any():
            break
        denom = ghi - glo
        xs = np.where(denom != 0, lo - glo * (hi - lo) / np.where(denom != 0, denom, 1.0), 0.5 * (lo + hi))
        bad = ~((xs > lo) & (xs < hi))
        xs = np.where(bad, 0.5 * (lo + hi), xs)
        k = np.flatnonzero(act)
        wk = np.linalg.eigvalsh(build_hamiltonian(p, xs[k, None] * dirs[k]))
        g = wk[np.arange(k.size), jj[k]] - wk[np.arange(k.size), ii[k]] - nu
        x[k] = xs[k]
        gx[k] = g
        left = np.sign(g) == np.sign(glo[k])
        # keep the bracket; halve the stale end value when the same side repeats
        kl, kr = k[left], k[~left]
        lo[kl], glo[kl] = xs[kl], g[left]
        ghi[kl] = np.where(side[kl] == 1, 0.5 * ghi[kl], ghi[kl])
        side[kl] = 1
        hi[kr], ghi[kr] = xs[kr], g[~left]
        glo[kr] = np.where(side[kr] == -1, 0.5 * glo[kr], glo[kr])
        side[kr] = -1
        done[k] = (np.abs(g) <= s.freq_tol) | (hi[k] - lo[k] <= s.field_tol)
    return x, gx


def _search(p, dirs, nu, b_grid, s):
    """Roots for a chunk of orientations; returns flat arrays."""
    d = p.dim
    iu, ju = np.triu_indices(d, 1)
    h = build_hamiltonian(p, b_grid[None, :, None] * dirs[:, None, :])
    if s.min_relative_intensity > 0:
        w, v = np.linalg.eigh(h)
        inten, _ = _intensity_weights(p, w, v, np.broadcast_to(dirs[:, None, :], w.shape[:-1] + (3,)),
                                      s.temperature, s.b_mw, s.intensity_model)
        inten = inten[..., iu, ju]
    else:
        w = np.linalg.eigvalsh(h)
        inten = None
    g = w[..., ju] - w[..., iu] - nu  # (K, N, P)
    pos = g >= 0
    kk, nn, pp = np.nonzero(pos[:, :-1] != pos[:, 1:])
    if inten is not None and kk.size:
        peak = np.maximum(inten[kk, nn, pp], inten[kk, nn + 1, pp])
        ref = np.abs(inten).max(axis=(1, 2))[kk]
        keep = peak >= s.min_relative_intensity * ref
        kk, nn, pp = kk[keep], nn[keep], pp[keep]
    if kk.size == 0:
        return (np.zeros(0, int),) * 1 + (np.zeros(0),) + (np.zeros(0, int),) * 2
    x, _ = _refine_roots(
        p, dirs[kk], b_grid[nn], b_grid[nn + 1], g[kk, nn, pp], g[kk, nn + 1, pp],
        iu[pp], ju[pp], nu, s,
    )
    return kk, x, iu[pp], ju[pp]


def find_resonances(p, directions, nu_mw, b_range, settings=None):
    """Resonances at fixed frequency for a stack of molecular-frame field directions.

    Returns a dict of flat arrays: orientation, field (T), lower, upper
    (0-based energy-sorted indices), frequency, rabi and intensity.
    """
    s = settings or ResonanceSettings()
    if not nu_mw > 0:
        raise ValueError("nu_mw must be positive")
    b0, b1 = float(b_range[0]), float(b_range[1])
    if not (0 <= b0 < b1):
        raise ValueError("b_range must be an increasing pair of nonnegative fields")
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    dirs = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
    n = max(int(np.ceil((b1 - b0) / s.step)), 1)
    b_grid = np.linspace(b0, b1, n + 1)

    parts = []
    for start in range(0, dirs.shape[0], s.chunk):
        kk, x, ii, jj = _search(p, dirs[start:start + s.chunk], nu_mw, b_grid, s)
        parts.append((kk + start, x, ii, jj))
    kk = np.concatenate([q[0] for q in parts])
    x = np.concatenate([q[1] for q in parts])
    ii = np.concatenate([q[2] for q in parts])
    jj = np.concatenate([q[3] for q in parts])

    out = dict(orientation=kk, field=x, lower=ii, upper=jj)
    if kk.size == 0:
        out.update(frequency=np.zeros(0), rabi=np.zeros(0), intensity=np.zeros(0))
        return out
    w, v = np.linalg.eigh(build_hamiltonian(p, x[:, None] * dirs[kk]))
    inten, om2 = _intensity_weights(p, w, v, dirs[kk], s.temperature, s.b_mw, s.intensity_model)
    r = np.arange(kk.size)
    out.update(
        frequency=w[r, jj] - w[r, ii],
        rabi=np.sqrt(om2[r, ii, jj]),
        intensity=inten[r, ii, jj],
    )
    order = np.lexsort((x, kk))
    return {key: val[order] for key, val in out.items()}


def resonance_fields(p, direction_mol, nu_mw, b_range, settings=None):
    """Resonance fields for one orientation as a list of ResonanceLine, by field."""
    r = find_resonances(p, np.asarray(direction_mol)[None, :], nu_mw, b_range, settings)
    return [
        ResonanceLine(
            float(r["field"][k]),
            TransitionRecord(int(r["lower"][k]) + 1, int(r["upper"][k]) + 1,
                             float(r["frequency"][k]), float(r["rabi"][k]), float(r["intensity"][k])),
        )
        for k in range(r["field"].size)
    ]


def strongest_lines(lines, n):
    """The ``n`` most intense lines, returned in order of field."""
    top = sorted(lines, key=lambda ln: ln.record.intensity, reverse=True)[:n]
    return sorted(top, key=lambda ln: ln.field)


@dataclass(frozen=True)
class RotationalDiagram:
    rotation_axis: str
    angles: np.ndarray  # deg
    site: np.ndarray  # per line
    angle: np.ndarray  # per line, deg
    field: np.ndarray  # per line, T
    lower: np.ndarray
    upper: np.ndarray
    intensity: np.ndarray

    def lines_at(self, site, angle, n=None):
        m = (self.site == site) & np.isclose(self.angle, angle)
        f, inten = self.field[m], self.intensity[m]
        if n is not None:
            keep = np.sort(np.argsort(-inten, kind="stable")[:n])
            f = f[keep]
        return np.sort(f)


def rotational_diagram(p, geom, nu_mw, rotation_axis, angles_deg, b_range=(0.2, 0.5),
                       sites=(1, 2), settings=None):
    """Line positions versus crystal rotation angle for each magnetic site."""
    angles = np.asarray(angles_deg, dtype=float)
    if angles.max() - angles.min() > 360.0:
        raise ValueError("angle grid must span at most 360 degrees")
    lab = geom.rotation_direction(rotation_axis, angles)
    cols = {k: [] for k in ("site", "angle", "field", "lower", "upper", "intensity")}
    for site in sites:
        g = geom.for_site(site)
        r = find_resonances(p, g.molecular_direction(lab), nu_mw, b_range, settings)
        cols["site"].append(np.full(r["field"].size, site))
        cols["angle"].append(angles[r["orientation"]])
        for key in ("field", "lower", "upper", "intensity"):
            cols[key].append(r[key])
    cat = {k: np.concatenate(v) for k, v in cols.items()}
    return RotationalDiagram(rotation_axis, angles, **cat)


# ------------------------------------------------------------------ spectra


@dataclass(frozen=True)
class Spectrum:
    abscissa: np.ndarray
    signal: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.shape(self.abscissa) != np.shape(self.signal):
            raise ValueError("abscissa and signal must have equal lengths")


def lorentzian(x, center, fwhm):
    """Unit-area Lorentzian."""
    g = 0.5 * fwhm
    return (g / np.pi) / ((x - center) ** 2 + g * g)


def lorentzian_derivative(x, center, fwhm):
    g = 0.5 * fwhm
    u = x - center
    return -(2.0 * g / np.pi) * u / (u * u + g * g) ** 2


def cw_spectrum(fields, intensities, b_grid, linewidth_mt=3.0, metadata=None):
    """Derivative-of-absorption spectrum: sum of intensity * dL/dB (b_grid in T)."""
    if not linewidth_mt > 0:
        raise ValueError("linewidth must be positive")
    b_grid = np.asarray(b_grid, dtype=float)
    fields = np.asarray(fields, dtype=float)
    inten = np.asarray(intensities, dtype=float)
    fwhm = linewidth_mt * 1e-3
    sig = np.zeros_like(b_grid)
    # chunked to bound memory for powder sums
    for s in range(0, fields.size, 4096):
        f = fields[s:s + 4096]
        sig += lorentzian_derivative(b_grid[:, None], f[None, :], fwhm) @ inten[s:s + 4096]
    meta = {"linewidth_fwhm_mt": linewidth_mt}
    meta.update(metadata or {})
    return Spectrum(b_grid, sig, meta)


def golden_hemisphere(n):
    """Deterministic near-uniform directions on the upper hemisphere."""
    if n < 1:
        raise ValueError("need at least one orientation")
    k = np.arange(n)
    z = 1.0 - (k + 0.5) / n
    r = np.sqrt(1.0 - z * z)
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


POWDER_SETTINGS = ResonanceSettings(step=1e-2, freq_tol=1e-2, min_relative_intensity=1e-3)


def powder_spectrum(p, nu_mw, b_grid, n_orientations=2000, linewidth_mt=3.0,
                    settings=None, directions=None):
    """Uniformly weighted orientation average of single-crystal CW spectra."""
    if directions is None:
        if n_orientations < 100:
            raise ValueError("powder averaging needs at least 100 orientations")
        directions = golden_hemisphere(n_orientations)
    directions = np.asarray(directions, dtype=float)
    b_grid = np.asarray(b_grid, dtype=float)
    s = settings or POWDER_SETTINGS
    # search slightly beyond the grid so lines just outside still contribute tails
    pad = 5 * linewidth_mt * 1e-3
    r = find_resonances(p, directions, nu_mw, (max(b_grid[0] - pad, 0.0), b_grid[-1] + pad), s)
    spec = cw_spectrum(r["field"], r["intensity"] / directions.shape[0], b_grid, linewidth_mt)
    meta = dict(spec.metadata, nu_mw=nu_mw, n_orientations=int(directions.shape[0]),
                temperature_k=s.temperature, intensity_model=s.intensity_model)
    return Spectrum(spec.abscissa, spec.signal, meta)


def most_intense_feature(spectrum):
    """Field of the strongest derivative feature.

    The feature is the pair formed by the largest |signal| extremum and the
    neighbouring extremum of opposite sign; its position is the zero crossing
    between them (the absorption maximum).
    """
    x, y = spectrum.abscissa, spectrum.signal
    k = int(np.argmax(np.abs(y)))
    sign = np.sign(y[k])
    # walk to the zero crossing on the side where the partner lobe lies
    left = k
    while left > 0 and np.sign(y[left - 1]) == sign:
        left -= 1
    right = k
    while right < y.size - 1 and np.sign(y[right + 1]) == sign:
        right += 1
    # a positive lobe sits on the low-field side of the absorption maximum
    if sign > 0:
        a, b = right, right + 1
    else:
        a, b = left - 1, left
    a, b = max(a, 0), min(b, y.size - 1)
    if y[a] == y[b]:
        return float(x[a])
    return float(x[a] - y[a] * (x[b] - x[a]) / (y[b] - y[a]))


# --------------------------------------------------------- transmission maps


@dataclass(frozen=True)
class TransmissionMap:
    frequency: np.ndarray  # MHz
    field: np.ndarray  # T
    t: np.ndarray  # (n_freq, n_field)
    metadata: dict = field(default_factory=dict)
    absorption: np.ndarray | None = None

    def __post_init__(self):
        if np.shape(self.t) != (np.size(self.frequency), np.size(self.field)):
            raise ValueError("map shape does not match the grids")


def _check_monotone(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2 or not np.all(np.diff(x) > 0):
        raise ValueError(f"{name} must be strictly increasing with at least two points")
    return x


def absorption_map(p, direction_mol, f_grid, b_values, temperature, linewidth_mhz=60.0,
                   drive_axis=None, b_mw=1e-3):
    """A(f, B) = sum over pairs of intensity * Lorentzian(f - f_ij(B)), shape (n_f, n_b)."""
    u = np.asarray(direction_mol, dtype=float)
    u = u / np.linalg.norm(u)
    b_values = np.asarray(b_values, dtype=float)
    f_grid = np.asarray(f_grid, dtype=float)
    w, v = np.linalg.eigh(build_hamiltonian(p, b_values[:, None] * u[None, :]))
    pop = boltzmann_populations(w, temperature)
    if drive_axis is None:
        drives = _transverse_drives(p, u, b_mw)
    else:
        drives = [drive_operator(p, drive_axis, b_mw)]
    om2 = _pair_omega2(v, drives)
    iu, ju = np.triu_indices(p.dim, 1)
    inten = (pop[:, iu] - pop[:, ju]) * om2[:, iu, ju]  # (n_b, P)
    freq = w[:, ju] - w[:, iu]
    out = np.empty((f_grid.size, b_values.size))
    for k in range(b_values.size):
        out[:, k] = lorentzian(f_grid[:, None], freq[k][None, :], linewidth_mhz) @ inten[k]
    return out


def transmission_map(p, direction_mol, f_grid, b_grid, temperature, linewidth_mhz=60.0,
                     delta_b=None, drive_axis=None, b_mw=1e-3):
    """Simulated normalized transmission t(f, B1) = A(f, B1) - A(f, B1 + dB)."""
    f_grid = _check_monotone(f_grid, "frequency grid")
    b_grid = _check_monotone(b_grid, "field grid")
    if delta_b is None:
        delta_b = float(b_grid[1] - b_grid[0])
    a1 = absorption_map(p, direction_mol, f_grid, b_grid, temperature, linewidth_mhz, drive_axis, b_mw)
    a2 = absorption_map(p, direction_mol, f_grid, b_grid + delta_b, temperature, linewidth_mhz,
                        drive_axis, b_mw)
    meta = dict(temperature_k=temperature, linewidth_mhz=linewidth_mhz, delta_b_t=delta_b,
                drive="transverse-average" if drive_axis is None else list(map(float, drive_axis)))
    return TransmissionMap(f_grid, b_grid, a1 - a2, meta, absorption=a1)


def ridge_frequencies(spectrum_column, frequency, rel_height=0.1):
    """Local maxima of an absorption column above ``rel_height`` of its maximum."""
    y = np.asarray(spectrum_column, dtype=float)
    peak = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] >= rel_height * y.max())
    return np.asarray(frequency)[1:-1][peak]


def normalize_transmission(s21, field_grid, reference, b_offset, frequency=None):
    """t(B1, f) = [S21(B1, f) - S21(B1 + dB, f)] / S21_0(f).

    ``s21`` has shape (n_freq, n_field). S21(B1 + dB) is linearly
    interpolated in field; only B1 with B1 + dB inside the map are returned.
    """
    s21 = np.asarray(s21)
    field_grid = _check_monotone(field_grid, "field grid")
    ref = np.asarray(reference)
    if s21.shape != (ref.size, field_grid.size):
        raise ValueError("S21 map must have shape (len(reference), len(field_grid))")
    if np.any(np.abs(ref) < 1e-12):
        raise ZeroReference("reference transmission vanishes on the frequency grid")
    if b_offset <= 0:
        raise ValueError("b_offset must be positive")
    b1 = field_grid[field_grid + b_offset <= field_grid[-1] + 1e-12 * abs(field_grid[-1])]
    if b1.size == 0:
        raise ValueError("b_offset exceeds the field range of the map")
    cols = np.searchsorted(field_grid, b1)
    b2 = np.minimum(b1 + b_offset, field_grid[-1])
    shifted = np.empty((ref.size, b1.size), dtype=np.result_type(s21, float))
    for part in (np.real, np.imag) if np.iscomplexobj(s21) else (np.real,):
        vals = np.array([np.interp(b2, field_grid, part(row)) for row in s21])
        if part is np.imag:
            shifted = shifted + 1j * vals
        else:
            shifted[...] = vals
    t = (s21[:, cols] - shifted) / ref[:, None]
    freq = np.arange(ref.size, dtype=float) if frequency is None else np.asarray(frequency, dtype=float)
    return TransmissionMap(freq, b1, t, {"b_offset_t": b_offset})


def read_s21_csv(path):
    """Long-format S21 CSV (freq_mhz, field_mt, s21_re, s21_im) to grids and a map."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    f = np.array([float(r["freq_mhz"]) for r in rows])
    b = np.array([float(r["field_mt"]) for r in rows]) * 1e-3
    z = np.array([float(r["s21_re"]) + 1j * float(r["s21_im"]) for r in rows])
    fu, fi = np.unique(f, return_inverse=True)
    bu, bi = np.unique(b, return_inverse=True)
    if fu.size * bu.size != z.size:
        raise ValueError(f"{path}: data do not form a complete frequency-field grid")
    m = np.full((fu.size, bu.size), np.nan + 0j)
    m[fi, bi] = z
    if np.isnan(m).any():
        raise ValueError(f"{path}: duplicate or missing grid points")
    return fu, bu, m


def read_reference_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    f = np.array([float(r["freq_mhz"]) for r in rows])
    z = np.array([float(r["s21_re"]) + 1j * float(r["s21_im"]) for r in rows])
    order = np.argsort(f)
    return f[order], z[order]
