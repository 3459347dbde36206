"""Axial S=1/2, I=7/2 spin Hamiltonian, crystal geometry and level sweeps.

The Hamiltonian is written in the molecular frame (z along V=O)::

    H = -g_perp*muB*(Sx*Bx + Sy*By) - g_par*muB*Sz*Bz
        + A_perp*(Ix*Sx + Iy*Sy) + A_par*Iz*Sz

in MHz. The laboratory frame X, Y, Z is that of the crystal holder, the
crystal frame is (x_c, y_c, Z) and each of the two molecular sites has its own
molecular frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .constants import MUB_MHZ_PER_T
from .spinops import product_space


class GridTooCoarse(RuntimeError):
    pass


@dataclass(frozen=True)
class SpinSystemParams:
    g_par: float = 1.963
    g_perp: float = 1.99
    a_par: float = 475.0  # MHz
    a_perp: float = 172.0  # MHz
    s: float = 0.5
    i: float = 3.5

    def __post_init__(self):
        if not (self.g_par > 0 and self.g_perp > 0):
            raise ValueError("g factors must be positive")

    @property
    def dim(self):
        return int(round((2 * self.s + 1) * (2 * self.i + 1)))

    @property
    def g_powder(self):
        """sqrt of the orientation-averaged g^2."""
        return float(np.sqrt((self.g_par**2 + 2 * self.g_perp**2) / 3))

    def with_(self, **changes):
        return replace(self, **changes)

    @classmethod
    def isotropic_hyperfine(cls, a=475.0, **kw):
        return cls(a_par=a, a_perp=a, **kw)

    @classmethod
    def uniaxial_hyperfine(cls, a_par=475.0, **kw):
        return cls(a_par=a_par, a_perp=0.0, **kw)


AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class FrameGeometry:
    """Orientation of the molecular z axis relative to the laboratory frame.

    Angles in degrees. Site 2 is related to site 1 by delta -> delta + 180,
    phi0 -> phi0 + 180.
    """

    epsilon: float = 64.7
    delta: float = 31.0
    phi0: float = 116.0
    site: int = 1

    def __post_init__(self):
        if self.site not in (1, 2):
            raise ValueError(f"site must be 1 or 2, got {self.site}")

    def for_site(self, site):
        return replace(self, site=site)

    @property
    def site_delta(self):
        return self.delta + (180.0 if self.site == 2 else 0.0)

    @property
    def site_phi0(self):
        return self.phi0 + (180.0 if self.site == 2 else 0.0)

    def z_mol(self):
        """Unit vector along z_M in laboratory coordinates."""
        e = np.radians(self.epsilon)
        d = np.radians(self.site_delta)
        return np.array([-np.sin(e) * np.sin(d), np.sin(e) * np.cos(d), np.cos(e)])

    def crystal_axes(self):
        """Rows x_c, y_c, z_c in laboratory coordinates (site independent)."""
        d = np.radians(self.delta)
        return np.array(
            [[np.cos(d), np.sin(d), 0.0], [-np.sin(d), np.cos(d), 0.0], [0.0, 0.0, 1.0]]
        )

    def lab_to_molecular(self):
        """Rotation matrix R with ``b_mol = R @ b_lab``; rows are x_M, y_M, z_M."""
        d = np.radians(self.site_delta)
        zm = self.z_mol()
        # x_M is perpendicular to z_M inside the laboratory XY plane
        xm = np.array([np.cos(d), np.sin(d), 0.0])
        ym = np.cross(zm, xm)
        return np.array([xm, ym, zm])

    def rotation_direction(self, axis, angle_deg):
        """Laboratory unit vector of B for a crystal rotation about ``axis``.

        About X the origin is the Y axis, about Y it is the X axis; about Z the
        angle is measured so that cos(theta) = sin(eps)*cos(phi - phi0).
        """
        phi = np.radians(np.asarray(angle_deg, dtype=float))
        zeros = np.zeros_like(phi)
        if axis == "X":
            vec = [zeros, np.cos(phi), np.sin(phi)]
        elif axis == "Y":
            vec = [np.cos(phi), zeros, np.sin(phi)]
        elif axis == "Z":
            # uses site-1 angles: the field direction does not depend on the site
            a = phi - np.radians(self.phi0) + np.radians(self.delta)
            vec = [-np.sin(a), np.cos(a), zeros]
        else:
            raise ValueError(f"rotation axis must be one of {AXES}, got {axis!r}")
        return np.stack(vec, axis=-1)

    def molecular_direction(self, lab_direction):
        lab_direction = np.asarray(lab_direction, dtype=float)
        return lab_direction @ self.lab_to_molecular().T


def field_in_molecular_frame(geom, rotation_axis, angle_deg):
    """cos(theta) between B and z_M for a crystal rotation (vectorised over angle)."""
    return geom.rotation_direction(rotation_axis, angle_deg) @ geom.z_mol()


def cos_theta_formula(geom, rotation_axis, angle_deg):
    """Closed-form cos(theta) for each rotation, used to cross-check the frames."""
    e = np.radians(geom.epsilon)
    d = np.radians(geom.site_delta)
    phi = np.radians(np.asarray(angle_deg, dtype=float))
    if rotation_axis == "X":
        return np.sin(e) * np.cos(d) * np.cos(phi) + np.cos(e) * np.sin(phi)
    if rotation_axis == "Y":
        return -np.sin(e) * np.sin(d) * np.cos(phi) + np.cos(e) * np.sin(phi)
    if rotation_axis == "Z":
        return np.sin(e) * np.cos(phi - np.radians(geom.site_phi0))
    raise ValueError(f"rotation axis must be one of {AXES}, got {rotation_axis!r}")


FRAMES = ("lab", "crystal", "molecular")


@dataclass(frozen=True)
class FieldPoint:
    magnitude: float  # tesla
    direction: tuple = (0.0, 0.0, 1.0)
    frame: str = "molecular"

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}")
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("field direction must be nonzero")
        object.__setattr__(self, "direction", tuple(d / n))

    def molecular_vector(self, geom=None):
        d = np.asarray(self.direction)
        if self.frame == "molecular":
            return self.magnitude * d
        geom = geom or FrameGeometry()
        if self.frame == "crystal":
            d = d @ geom.crystal_axes()
        return self.magnitude * geom.molecular_direction(d)


def build_hamiltonian(p, b_mol):
    """Hamiltonian (MHz) for molecular-frame field(s) ``b_mol`` in tesla.

    ``b_mol`` may be a 3-vector or an array ``(..., 3)``; the result then has
    shape ``(..., 16, 16)``.
    """
    ops = product_space(p.s, p.i)
    b = np.asarray(b_mol, dtype=float)
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    hf = p.a_perp * (ops.ix @ ops.sx + ops.iy @ ops.sy) + p.a_par * (ops.iz @ ops.sz)
    zx = -p.g_perp * MUB_MHZ_PER_T * ops.sx
    zy = -p.g_perp * MUB_MHZ_PER_T * ops.sy
    zz = -p.g_par * MUB_MHZ_PER_T * ops.sz
    e = (...,) + (None, None)
    return hf + bx[e] * zx + by[e] * zy + bz[e] * zz


def zeeman_derivative(p, direction_mol):
    """dH/dB (MHz/T) along a molecular-frame unit vector (stackable)."""
    ops = product_space(p.s, p.i)
    u = np.asarray(direction_mol, dtype=float)
    e = (...,) + (None, None)
    return -MUB_MHZ_PER_T * (
        p.g_perp * (u[..., 0][e] * ops.sx + u[..., 1][e] * ops.sy)
        + p.g_par * u[..., 2][e] * ops.sz
    )


def build_rotated_axial_hamiltonian(p, theta, b):
    """Hamiltonian in the frame where B lies in the x'z' plane at angle theta to z_M.

    Uses the positive Zeeman sign of the single-crystal analysis; the spectrum
    coincides with :func:`build_hamiltonian` at b_mol = B(sin θ, 0, cos θ).
    """
    ops = product_space(p.s, p.i)
    zeeman = MUB_MHZ_PER_T * b * (
        np.sin(theta) * p.g_perp * ops.sx + np.cos(theta) * p.g_par * ops.sz
    )
    hf = p.a_perp * (ops.sx @ ops.ix + ops.sy @ ops.iy) + p.a_par * (ops.sz @ ops.iz)
    return zeeman + hf


def levels(p, b_mol, method="jacobi"):
    return linalg.eigh(build_hamiltonian(p, b_mol), method=method)


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class LevelSweep:
    axis: np.ndarray  # field (T) or angle (deg) per point
    eigenvalues: np.ndarray  # (N, d) ascending, MHz
    eigenvectors: np.ndarray  # (N, d, d)
    labels: np.ndarray  # (N, d) adiabatic label (1-based) of each sorted level
    scores: np.ndarray = field(repr=False)  # (N-1, d) overlap of each assignment

    def tracked(self):
        """Energies reordered by adiabatic label: column k follows label k+1."""
        order = np.argsort(self.labels, axis=1)
        return np.take_along_axis(self.eigenvalues, order, axis=1)


def _clusters(w, tol):
    """Index of the degenerate cluster each (sorted) level belongs to."""
    ids = np.zeros(len(w), dtype=int)
    for k in range(1, len(w)):
        ids[k] = ids[k - 1] + (1 if w[k] - w[k - 1] > tol else 0)
    return ids


def overlap_scores(w0, v0, w1, v1, degeneracy_tol=1e-6):
    """|<v0_k|v1_l>|^2 with degenerate clusters treated as subspaces."""
    ov = np.abs(np.conj(v0).T @ v1) ** 2
    c0 = _clusters(w0, degeneracy_tol)
    c1 = _clusters(w1, degeneracy_tol)
    if c0[-1] == len(w0) - 1 and c1[-1] == len(w1) - 1:
        return ov
    n0 = np.bincount(c0)
    n1 = np.bincount(c1)
    block = np.zeros((n0.size, n1.size))
    np.add.at(block, (c0[:, None], c1[None, :]), ov)
    block /= np.minimum.outer(n0, n1)
    return block[c0][:, c1]


def greedy_assignment(scores):
    """Match rows to columns by repeatedly taking the largest remaining score."""
    s = np.array(scores, dtype=float)
    n = s.shape[0]
    match = np.full(n, -1)
    best = np.zeros(n)
    for _ in range(n):
        k, l = np.unravel_index(np.argmax(s), s.shape)
        match[k] = l
        best[k] = scores[k][l]
        s[k, :] = -1.0
        s[:, l] = -1.0
    return match, best


def adiabatic_labels(eigenvalues, eigenvectors, min_score=0.5, degeneracy_tol=1e-6):
    """Follow states across consecutive grid points by maximal overlap.

    Returns (labels, scores). Raises GridTooCoarse when some state has no
    successor with squared overlap of at least ``min_score``.
    """
    w = np.asarray(eigenvalues)
    v = np.asarray(eigenvectors)
    npts, d = w.shape
    labels = np.zeros((npts, d), dtype=int)
    labels[0] = np.arange(1, d + 1)
    scores = np.ones((max(npts - 1, 0), d))
    for n in range(npts - 1):
        s = overlap_scores(w[n], v[n], w[n + 1], v[n + 1], degeneracy_tol)
        match, best = greedy_assignment(s)
        scores[n] = best
        if np.min(best) < min_score:
            k = int(np.argmin(best))
            raise GridTooCoarse(
                f"state {k + 1} between points {n} and {n + 1} has best overlap "
                f"{best[k]:.3f} < {min_score}; refine the grid"
            )
        labels[n + 1, match] = labels[n]
    return labels, scores


def sweep_levels(p, b_fields_mol, axis_values, method="jacobi", min_score=0.5):
    axis_values = np.asarray(axis_values, dtype=float)
    if axis_values.ndim != 1 or axis_values.size < 2:
        raise ValueError("a sweep needs at least two grid points")
    steps = np.diff(axis_values)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("sweep grid must be strictly monotone")
    dec = linalg.eigh(build_hamiltonian(p, b_fields_mol), method=method)
    labels, scores = adiabatic_labels(dec.eigenvalues, dec.eigenvectors, min_score)
    return LevelSweep(axis_values, dec.eigenvalues, dec.eigenvectors, labels, scores)


def field_sweep(p, direction_mol, b_grid, **kw):
    """Levels versus field magnitude along a fixed molecular-frame direction."""
    u = np.asarray(direction_mol, dtype=float)
    u = u / np.linalg.norm(u)
    b_grid = np.asarray(b_grid, dtype=float)
    return sweep_levels(p, b_grid[:, None] * u[None, :], b_grid, **kw)


def angle_sweep(p, geom, rotation_axis, angles_deg, b, **kw):
    """Levels versus crystal rotation angle at fixed field magnitude."""
    lab = geom.rotation_direction(rotation_axis, angles_deg)
    return sweep_levels(p, b * geom.molecular_direction(lab), angles_deg, **kw)


FIELD_AXES = ("X", "Y", "Z", "xc", "yc", "molx", "moly", "molz")


def lab_axis_direction(geom, axis):
    """Molecular-frame unit vector of a named axis.

    Laboratory X/Y/Z, crystal xc/yc, or molecular molx/moly/molz.
    """
    lab = {"X": (1.0, 0.0, 0.0), "Y": (0.0, 1.0, 0.0), "Z": (0.0, 0.0, 1.0)}
    mol = {"molx": (1.0, 0.0, 0.0), "moly": (0.0, 1.0, 0.0), "molz": (0.0, 0.0, 1.0)}
    if axis in lab:
        return geom.molecular_direction(np.array(lab[axis]))
    if axis in ("xc", "yc"):
        return geom.molecular_direction(geom.crystal_axes()[0 if axis == "xc" else 1])
    if axis in mol:
        return np.array(mol[axis])
    raise ValueError(f"unknown field axis {axis!r}; choose from {FIELD_AXES}")
