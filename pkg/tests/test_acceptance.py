"""The thirteen acceptance criteria at their stated tolerances.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import numpy as np
import pytest

from conftest import random_hermitian
from vanadyl_qudit import linalg, qudit, relaxometry, spectroscopy, thermo
from vanadyl_qudit.hamiltonian import FrameGeometry, SpinSystemParams, build_hamiltonian, lab_axis_direction

P = SpinSystemParams()
GEOM = FrameGeometry()
NU = 9849.0  # MHz


def test_01_zero_field_isotropic_multiplets(criterion):
    w = linalg.eigvalsh(build_hamiltonian(SpinSystemParams.isotropic_hyperfine(), np.zeros(3)))
    expected = np.array([-1068.75] * 7 + [831.25] * 9)
    err = np.max(np.abs(w - expected) / np.abs(expected))
    gap_err = abs((w[7] - w[6]) - 1900.0) / 1900.0
    ok = err <= 1e-9 and gap_err <= 1e-9
    criterion(1, "zero-field F=3/F=4 multiplets", ok, f"max rel err {err:.1e}, gap {w[7] - w[6]:.6f} MHz")
    assert ok


def test_02_xband_lines_along_yc(criterion):
    yc = lab_axis_direction(GEOM, "yc")
    lines = spectroscopy.strongest_lines(spectroscopy.resonance_fields(P, yc, NU, (0.25, 0.45)), 8)
    f = np.array([ln.field for ln in lines]) * 1e3
    # eight lines ordered in field: the central pair are lines 4 and 5, the outermost high-field line is 8
    central = f[3] if abs(f[3] - 343.6) <= abs(f[4] - 343.6) else f[4]
    outer = f[7]
    ok = len(f) == 8 and abs(central - 343.6) <= 2.0 and abs(outer - 408.9) <= 2.0
    criterion(2, "X-band lines along y_c", ok,
              f"central {central:.2f} mT (target 343.6), outer {outer:.2f} mT (target 408.9), tol 2 mT")
    assert ok


def test_03_powder_most_intense_feature(criterion):
    b = np.linspace(0.25, 0.45, 2001)
    spec = spectroscopy.powder_spectrum(P, NU, b, n_orientations=2000)
    feat = spectroscopy.most_intense_feature(spec) * 1e3
    ok = abs(feat - 346.6) <= 3.0
    criterion(3, "powder most intense feature", ok, f"{feat:.2f} mT (target 346.6 +- 3)")
    assert ok


def test_04_eight_transmission_ridges(criterion):
    u = lab_axis_direction(GEOM, "X")
    f = np.arange(50.0, 14000.0, 5.0)
    b = np.linspace(0.25, 0.40, 16)
    m = spectroscopy.transmission_map(P, u, f, b, 4.2)
    counts, spreads = [], []
    for k in range(b.size):
        ridges = spectroscopy.ridge_frequencies(m.absorption[:, k], f)
        counts.append(ridges.size)
        if ridges.size > 1:
            g = np.diff(ridges)
            spreads.append((g.max() - g.min()) / g.mean())
    worst = max(spreads)
    ok = all(c == 8 for c in counts) and worst <= 0.15
    criterion(4, "eight quasi-equidistant ridges", ok,
              f"ridge counts {sorted(set(counts))}, worst spacing spread {100 * worst:.1f}%")
    assert ok


def test_05_curie_constant(criterion):
    t = np.linspace(50.0, 300.0, 26)
    _, chit = thermo.susceptibility(P, t)
    dev = np.max(np.abs(chit - 0.367))
    ok = dev <= 0.004
    criterion(5, "powder Curie constant", ok, f"chiT in [{chit.min():.5f}, {chit.max():.5f}] cm3K/mol")
    assert ok


def test_06_brillouin(criterion):
    b = np.linspace(0.1, 5.0, 50)
    m = np.array([thermo.magnetization(P, x, 2.0) for x in b]).ravel()
    ref = thermo.brillouin_half(b, 2.0, g=1.98)
    dev = np.max(np.abs(m / ref - 1))
    ok = dev <= 0.02
    criterion(6, "Brillouin magnetization at 2 K", ok, f"max deviation {100 * dev:.2f}%")
    assert ok


def test_07_entropy_conservation(criterion):
    # field along the molecular z axis
    s = thermo.entropy_integral(P, 2.0, 1e-3, 50.0, np.array([0.0, 0.0, 1.0]))
    dev = s / np.log(16) - 1
    ok = abs(dev) <= 0.005
    criterion(7, "entropy integral equals R ln 16", ok, f"{s:.5f} vs {np.log(16):.5f} ({100 * dev:+.3f}%)")
    assert ok


def test_08_universality_crossover(criterion):
    scan = qudit.universality_scan(P, "X", [0.02, 0.04, 0.1, 0.3])
    # path oracle: Floyd-Warshall on the same graph at every field
    oracle_ok = True
    for b in scan.fields:
        rabi = qudit.rabi_matrix(P, b * lab_axis_direction(GEOM, "X"))
        g = qudit.addressable_transitions(rabi, 0.2)
        t = g.time_matrix()
        for k in range(t.shape[0]):
            t = np.minimum(t, t[:, k:k + 1] + t[k:k + 1, :])
        got = qudit.fastest_times(g)
        oracle_ok &= np.array_equal(np.isinf(got), np.isinf(t)) and np.allclose(got[np.isfinite(t)], t[np.isfinite(t)])
    u = scan.universal
    ok = bool(u[0] and u[1] and not u[3] and scan.min_wt2[0] > scan.min_wt2[2] and oracle_ok)
    criterion(8, "universality crossover along X", ok,
              f"universal {list(map(bool, u))}, min W*T2 {np.round(scan.min_wt2, 2).tolist()}, oracle {oracle_ok}")
    assert ok


def test_09_degenerate_hyperfine_limits(criterion):
    x = 0.02 * lab_axis_direction(GEOM, "X")
    iso = qudit.universality_report(SpinSystemParams.isotropic_hyperfine(), x)
    uni = qudit.universality_report(SpinSystemParams.uniaxial_hyperfine(), x)
    ok = not iso.universal and not uni.universal
    criterion(9, "isotropic and uniaxial limits non-universal", ok,
              f"disconnected pairs: isotropic {len(iso.disconnected)}, uniaxial {len(uni.disconnected)}")
    assert ok


def test_10_fitter_round_trips(criterion):
    worst = 0.0
    for kind in sorted(relaxometry.KINDS):
        model = relaxometry.FitModel(kind)
        truth = {"HahnStretched": (0.01, 1.0, 3.76, 1.05)}.get(kind)
        trace, p_true = relaxometry.synthetic_trace(kind, truth)
        for sign in (1, -1):
            start = {k: v if k in model.fixed else v * (1 + 0.1 * sign) for k, v in p_true.items()}
            res = relaxometry.fit(model, trace, start)
            worst = max(worst, max(abs(res.params[k] / v - 1) for k, v in p_true.items()))
    f = np.geomspace(1.0, 1e5, 81)
    tau, chi_s, chi_t = 1e-3, 0.1, 1.0
    debye = relaxometry.DecayTrace(f, relaxometry.cole_cole(f, chi_s, chi_t, tau, 1.0))
    res = relaxometry.fit(relaxometry.FitModel("ColeCole"), debye,
                          dict(chi_s=0.11, chi_t=0.9, tau=1.1e-3, beta=0.9))
    p = res.params
    peak = -relaxometry.cole_cole(1 / (2 * np.pi * p["tau"]), p["chi_s"], p["chi_t"], p["tau"], p["beta"]).imag
    peak_err = abs(peak - (chi_t - chi_s) / 2)
    ok = worst <= 1e-3 and peak_err <= 1e-6
    criterion(10, "fitter round trips and Debye peak", ok, f"worst rel err {worst:.1e}, peak err {peak_err:.1e}")
    assert ok


def test_11_eigensolver_property_suite(criterion):
    rng = np.random.default_rng(11)
    h = random_hermitian(rng, 16, stack=(1000,))
    dec = linalg.eigh(h)
    w, v = dec.eigenvalues, dec.eigenvectors
    norm = np.max(np.abs(h), axis=(-1, -2))
    recon = np.max(np.abs(v @ (w[..., None] * np.conj(np.swapaxes(v, -1, -2))) - h), axis=(-1, -2)) / norm
    ortho = np.max(np.abs(np.conj(np.swapaxes(v, -1, -2)) @ v - np.eye(16)), axis=(-1, -2))
    trace = np.abs(np.trace(h, axis1=-2, axis2=-1).real - w.sum(-1)) / norm
    ok = recon.max() <= 1e-10 and ortho.max() <= 1e-10 and trace.max() <= 1e-9
    criterion(11, "eigensolver on 1000 random matrices", ok,
              f"recon {recon.max():.1e}, ortho {ortho.max():.1e}, trace {trace.max():.1e}")
    assert ok


def test_12_rotational_symmetry(criterion):
    phi0 = GEOM.phi0
    offsets = np.arange(0.0, 181.0, 15.0)
    angles = np.concatenate([phi0 + offsets, phi0 - offsets[1:]])
    diag = spectroscopy.rotational_diagram(P, GEOM, NU, "Z", angles, (0.25, 0.45))
    mirror = 0.0
    for site in (1, 2):
        for d in offsets[1:]:
            a = diag.lines_at(site, phi0 + d, 8)
            b = diag.lines_at(site, phi0 - d, 8)
            mirror = max(mirror, np.max(np.abs(a - b)) if a.size == b.size == 8 else np.inf)
    coalesce = 0.0
    for axis in ("Z", "X", "Y"):
        per_site = [
            np.sort([ln.field for ln in spectroscopy.strongest_lines(spectroscopy.resonance_fields(
                P, lab_axis_direction(GEOM.for_site(s), axis), NU, (0.25, 0.45)), 8)])
            for s in (1, 2)
        ]
        coalesce = max(coalesce, np.max(np.abs(per_site[0] - per_site[1])))
    ok = mirror * 1e3 <= 0.1 and coalesce * 1e3 <= 0.1
    criterion(12, "Z-rotation mirror symmetry and site coalescence", ok,
              f"mirror mismatch {mirror * 1e3:.2e} mT, site mismatch {coalesce * 1e3:.2e} mT")
    assert ok


def test_13_transmission_normalization(criterion):
    gamma, depth, slope = 20.0, 0.3, 28000.0  # MHz FWHM, dip depth, MHz/T
    width_b = gamma / slope  # linewidth expressed in field
    db = 0.1 * width_b
    f = np.linspace(9000.0, 11000.0, 801)
    b = 0.35 + db * np.arange(-60, 61)
    ref = np.full(f.size, 0.9 + 0.05j)
    hw = 0.5 * gamma

    def s21(bb):
        x = f[:, None] - (9849.0 + slope * (bb[None, :] - 0.35))
        return ref[:, None] * (1 - depth * hw**2 / (x * x + hw**2))

    def ds21_db(bb):
        x = f[:, None] - (9849.0 + slope * (bb[None, :] - 0.35))
        return ref[:, None] * (-depth * hw**2 * 2 * x * slope / (x * x + hw**2) ** 2)

    t = spectroscopy.normalize_transmission(s21(b), b, ref, db, f)
    # forward difference over [B1, B1 + dB] against the analytic derivative at the midpoint
    analytic = -db * ds21_db(t.field + 0.5 * db) / ref[:, None]
    rms = np.sqrt(np.mean(np.abs(t.t - analytic) ** 2) / np.mean(np.abs(analytic) ** 2))
    at_b1 = -db * ds21_db(t.field) / ref[:, None]
    rms_b1 = np.sqrt(np.mean(np.abs(t.t - at_b1) ** 2) / np.mean(np.abs(at_b1) ** 2))
    ok = rms <= 0.05
    criterion(13, "transmission normalization vs analytic derivative", ok,
              f"RMS {100 * rms:.2f}% at interval midpoint ({100 * rms_b1:.1f}% evaluated at B1)")
    assert ok
