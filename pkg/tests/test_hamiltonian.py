import numpy as np
import pytest
from hypothesis import given, strategies as st

from vanadyl_qudit import hamiltonian as ham
from vanadyl_qudit.constants import MUB_MHZ_PER_T
from vanadyl_qudit.linalg import eigvalsh

P = ham.SpinSystemParams()
GEOM = ham.FrameGeometry()


def breit_rabi_axial(p, bz):
    """Closed-form levels for B along z_M: 2x2 blocks of fixed M = mS + mI."""
    gb = p.g_par * MUB_MHZ_PER_T * bz
    out = [1.75 * p.a_par - gb / 2, 1.75 * p.a_par + gb / 2]  # M = +4, -4
    for m in range(-3, 4):
        r = 0.5 * np.sqrt((p.a_par * m - gb) ** 2 + p.a_perp**2 * (16 - m * m))
        out += [-p.a_par / 4 + r, -p.a_par / 4 - r]
    return np.sort(out)


def test_defaults():
    assert (P.g_par, P.g_perp, P.a_par, P.a_perp) == (1.963, 1.99, 475.0, 172.0)
    assert (GEOM.epsilon, GEOM.delta, GEOM.phi0) == (64.7, 31.0, 116.0)
    with pytest.raises(ValueError):
        ham.SpinSystemParams(g_par=0)


def test_isotropic_zero_field_multiplets():
    w = eigvalsh(ham.build_hamiltonian(ham.SpinSystemParams.isotropic_hyperfine(), np.zeros(3)))
    assert np.allclose(w[:7], -2.25 * 475.0, rtol=1e-12)
    assert np.allclose(w[7:], 1.75 * 475.0, rtol=1e-12)


@pytest.mark.parametrize("bz", [0.0, 0.01, 0.1, 0.35, 2.0])
def test_axial_field_matches_closed_form(bz):
    w = eigvalsh(ham.build_hamiltonian(P, (0.0, 0.0, bz)))
    assert np.allclose(w, breit_rabi_axial(P, bz), atol=1e-9)


def test_stretched_states_are_eigenvectors():
    h = ham.build_hamiltonian(P, (0.0, 0.0, 0.3))
    gb = P.g_par * MUB_MHZ_PER_T * 0.3
    e_top = -gb / 2 + P.a_par * 0.5 * 3.5
    assert np.allclose(h[:, 0], np.eye(16)[:, 0] * e_top)


def test_stacked_build():
    b = np.random.default_rng(1).normal(size=(4, 3, 3))
    h = ham.build_hamiltonian(P, b)
    assert h.shape == (4, 3, 16, 16)
    assert np.allclose(h[2, 1], ham.build_hamiltonian(P, b[2, 1]))


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_property_traceless_hermitian_and_reversal(b):
    h = ham.build_hamiltonian(P, b)
    assert abs(np.trace(h)) <= 1e-9 * np.max(np.abs(h))
    assert np.allclose(h, h.conj().T)
    w1 = np.linalg.eigvalsh(h)
    w2 = np.linalg.eigvalsh(ham.build_hamiltonian(P, -np.asarray(b)))
    assert np.allclose(w1, w2, atol=1e-9)


@given(theta=st.floats(0, np.pi), b=st.floats(0, 1.5), phi=st.floats(0, 2 * np.pi))
def test_property_rotated_axial_form_and_azimuth(theta, b, phi):
    w_rot = np.linalg.eigvalsh(ham.build_rotated_axial_hamiltonian(P, theta, b))
    b_mol = b * np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    w = np.linalg.eigvalsh(ham.build_hamiltonian(P, b_mol))
    assert np.allclose(w_rot, w, atol=1e-8)


def test_zeeman_derivative_matches_finite_difference():
    u = np.array([0.3, -0.5, 0.8])
    u /= np.linalg.norm(u)
    dh = ham.zeeman_derivative(P, u)
    fd = (ham.build_hamiltonian(P, 0.2001 * u) - ham.build_hamiltonian(P, 0.1999 * u)) / 2e-4
    assert np.allclose(dh, fd, atol=1e-6)


# ------------------------------------------------------------ geometry


def test_frames_are_rotations():
    for site in (1, 2):
        r = GEOM.for_site(site).lab_to_molecular()
        assert np.allclose(r @ r.T, np.eye(3))
        assert np.isclose(np.linalg.det(r), 1.0)
    c = GEOM.crystal_axes()
    assert np.allclose(c @ c.T, np.eye(3))


def test_yc_and_xc_angles():
    zc = GEOM.z_mol()
    xc, yc, _ = GEOM.crystal_axes()
    assert np.isclose(np.degrees(np.arccos(yc @ zc)), 90 - 64.7)
    assert np.isclose(xc @ zc, 0.0, atol=1e-15)
    assert np.allclose(ham.lab_axis_direction(GEOM, "yc"), GEOM.molecular_direction(yc))


@given(angle=st.floats(-360, 360), axis=st.sampled_from(["X", "Y", "Z"]), site=st.sampled_from([1, 2]))
def test_property_cos_theta_matches_closed_form(angle, axis, site):
    g = GEOM.for_site(site)
    a = ham.field_in_molecular_frame(g, axis, angle)
    b = ham.cos_theta_formula(g, axis, angle)
    assert np.isclose(a, b, atol=1e-12)
    # the molecular-frame field has the same z component
    d = g.molecular_direction(g.rotation_direction(axis, angle))
    assert np.isclose(d[2], a, atol=1e-12)


def test_special_rotation_points():
    g1, g2 = GEOM.for_site(1), GEOM.for_site(2)
    eps = np.radians(64.7)
    assert np.isclose(ham.field_in_molecular_frame(g1, "Z", 116.0), np.sin(eps))
    for g in (g1, g2):
        assert np.isclose(ham.field_in_molecular_frame(g, "X", 90.0), np.cos(eps))
    assert np.isclose(ham.field_in_molecular_frame(g1, "Y", 0.0), -ham.field_in_molecular_frame(g2, "Y", 0.0))


def test_field_point_frames():
    fp = ham.FieldPoint(0.5, (0, 0, 2), "molecular")
    assert np.allclose(fp.molecular_vector(), (0, 0, 0.5))
    lab = ham.FieldPoint(1.0, (1, 0, 0), "lab")
    assert np.allclose(lab.molecular_vector(GEOM), ham.lab_axis_direction(GEOM, "X"))
    cr = ham.FieldPoint(1.0, (0, 1, 0), "crystal")
    assert np.allclose(cr.molecular_vector(GEOM), ham.lab_axis_direction(GEOM, "yc"))
    with pytest.raises(ValueError):
        ham.FieldPoint(1.0, (0, 0, 0))
    with pytest.raises(ValueError):
        ham.FieldPoint(1.0, (1, 0, 0), "rotor")
    with pytest.raises(ValueError):
        ham.lab_axis_direction(GEOM, "W")


# --------------------------------------------------------------- sweeps


def test_two_point_diagonal_sweep_identity_labels():
    p = ham.SpinSystemParams.uniaxial_hyperfine()
    sw = ham.field_sweep(p, (0, 0, 1), [0.3, 0.31])
    assert np.array_equal(sw.labels[1], sw.labels[0])


def test_highest_level_increases_along_z():
    b = np.linspace(0.0, 0.5, 501)
    sw = ham.field_sweep(P, (0, 0, 1), b, method="lapack")
    top = sw.eigenvalues[b >= 0.05, -1]
    assert np.all(np.diff(top) > 0)


def test_tracking_fine_grid_lab_x():
    b = np.linspace(0.0, 0.3, 301)
    sw = ham.field_sweep(P, ham.lab_axis_direction(GEOM, "X"), b, method="lapack")
    assert np.all(sw.scores >= 0.5)
    for row in sw.labels:
        assert sorted(row) == list(range(1, 17))
    tracked = sw.tracked()
    assert tracked.shape == (301, 16)


def test_coarse_grid_detected():
    with pytest.raises(ham.GridTooCoarse):
        ham.field_sweep(P, ham.lab_axis_direction(GEOM, "X"), [0.0, 0.5])


def test_sweep_grid_validation():
    with pytest.raises(ValueError):
        ham.field_sweep(P, (0, 0, 1), [0.1])
    with pytest.raises(ValueError):
        ham.field_sweep(P, (0, 0, 1), [0.1, 0.3, 0.2])


def test_angle_sweep_runs():
    sw = ham.angle_sweep(P, GEOM, "Z", np.arange(0, 181, 1.0), 0.35, method="lapack")
    assert sw.eigenvalues.shape == (181, 16)


def test_high_field_octets_quasi_equidistant():
    w = eigvalsh(ham.build_hamiltonian(P, (0, 0, 1.0)))
    # octet centroids are split by the electron Zeeman energy
    gap = w[8:].mean() - w[:8].mean()
    assert np.isclose(gap, P.g_par * MUB_MHZ_PER_T, rtol=0.01)
    for octet in (w[:8], w[8:]):
        s = np.diff(octet)
        assert s.max() / s.min() - 1 < 0.10
