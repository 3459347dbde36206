import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vanadyl_qudit import thermo
from vanadyl_qudit.constants import KB_MHZ_PER_K, MUB_MHZ_PER_T
from vanadyl_qudit.hamiltonian import SpinSystemParams, build_hamiltonian

P = SpinSystemParams()
FREE = SpinSystemParams(g_par=2.0, g_perp=2.0, a_par=0.0, a_perp=0.0)
Z = np.array([0.0, 0.0, 1.0])


def test_two_level_schottky_anomaly():
    delta = 1000.0  # MHz
    t = np.linspace(0.2, 2.0, 20001) * delta / KB_MHZ_PER_K
    c = thermo.heat_capacity_from_levels([0.0, delta], t)
    k = np.argmax(c)
    assert c[k] == pytest.approx(0.4392, abs=1e-4)
    assert KB_MHZ_PER_K * t[k] / delta == pytest.approx(0.4168, abs=1e-3)


def test_moments_match_direct_sums():
    e = np.array([-300.0, 10.0, 50.0, 900.0])
    t = 0.02
    b = np.exp(-e / (KB_MHZ_PER_K * t))
    z = b.sum()
    mean = (b * e).sum() / z
    var = (b * e * e).sum() / z - mean**2
    m = thermo.partition_and_moments(e, t)
    assert m.mean == pytest.approx(mean)
    assert m.variance == pytest.approx(var, rel=1e-9)
    assert thermo.heat_capacity_from_levels(e, t) == pytest.approx(var / (KB_MHZ_PER_K * t) ** 2, rel=1e-9)
    s = np.log(z) + mean / (KB_MHZ_PER_K * t)  # ln Z on unshifted levels
    assert thermo.entropy_from_levels(e, t) == pytest.approx(s, rel=1e-9)
    with pytest.raises(ValueError):
        thermo.heat_capacity_from_levels(e, [1.0, 0.0])


def test_entropy_limits():
    assert thermo.entropy(P, 2.0, 1e4, Z) == pytest.approx(np.log(16), abs=1e-3)
    w = np.linalg.eigvalsh(build_hamiltonian(P, 2.0 * Z))
    assert thermo.ground_degeneracy(w) == 1
    assert thermo.entropy(P, 2.0, 1e-4, Z) == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=20)
@given(st.floats(0.01, 5.0), st.floats(0.01, 300.0))
def test_property_heat_capacity_nonnegative_and_magnetization_odd(b, t):
    u = np.array([0.2, -0.4, 0.9])
    assert thermo.heat_capacity(P, b, t, u) >= 0
    m_pos = thermo.magnetization(P, b, t, u)
    m_neg = thermo.magnetization(P, -b, t, u)
    assert m_neg == pytest.approx(-m_pos, rel=1e-9, abs=1e-15)


def test_magnetization_matches_free_energy_derivative():
    t, b, h = 0.8, 0.5, 1e-5

    def free_energy(bb):
        w = np.linalg.eigvalsh(build_hamiltonian(P, bb * Z))
        return -KB_MHZ_PER_K * t * np.log(np.exp(-(w - w.min()) / (KB_MHZ_PER_K * t)).sum()) + w.min()

    m_fd = -(free_energy(b + h) - free_energy(b - h)) / (2 * h) / MUB_MHZ_PER_T
    assert thermo.magnetization(P, b, t, Z) == pytest.approx(m_fd, rel=1e-6)


def test_saturation_along_z():
    assert thermo.magnetization(P, 10.0, 0.05, Z) == pytest.approx(P.g_par / 2, rel=1e-3)


def test_free_spin_curie_constant():
    chi, chit = thermo.susceptibility(FREE, np.array([50.0, 300.0]), direction_mol=Z)
    # C = N_A g^2 mu_B^2 S(S+1) / 3 k_B = 0.12505 g^2 S(S+1)
    assert np.allclose(chit, 0.12505 * 4 * 0.75, rtol=2e-3)
    assert chi[0] > chi[1]


def test_free_spin_brillouin():
    b = np.linspace(0.1, 5.0, 11)
    m = np.array([thermo.magnetization(FREE, x, 2.0, Z) for x in b]).ravel()
    assert np.allclose(m, thermo.brillouin_half(b, 2.0, g=2.0), rtol=1e-9)


def test_powder_average_shape():
    t = np.array([1.0, 10.0, 100.0])
    c = thermo.heat_capacity(P, 2.0, t)
    assert c.shape == (3,)
    rows = thermo.thermo_table(P, 2.0, t, n_orientations=50)
    assert [r.temperature for r in rows] == [1.0, 10.0, 100.0]
    assert all(r.heat_capacity >= 0 and r.susceptibility > 0 for r in rows)


def test_entropy_integral_two_level():
    p = SpinSystemParams(g_par=2.0, g_perp=2.0, a_par=0.0, a_perp=0.0, i=0.0)
    s = thermo.entropy_integral(p, 1.0, 1e-3, 500.0, Z)
    assert s == pytest.approx(np.log(2), rel=1e-3)
