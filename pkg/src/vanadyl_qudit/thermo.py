"""Equilibrium thermodynamics of the 16-level spectrum.

Heat capacity and entropy are per molecule in units of k_B (so molar values
in units of R). Magnetization is in Bohr magnetons per molecule and the molar
susceptibility in CGS-emu (cm^3/mol).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import GAUSS_PER_TESLA, KB_MHZ_PER_K, MUB_MHZ_PER_T, NA_MUB_EMU
from .hamiltonian import build_hamiltonian, zeeman_derivative
from .spectroscopy import golden_hemisphere


@dataclass(frozen=True)
class Moments:
    z: np.ndarray  # partition function of the shifted levels
    mean: np.ndarray  # <E>, MHz
    mean_sq: np.ndarray  # <E^2>, MHz^2
    shift: np.ndarray  # lowest level, MHz

    @property
    def variance(self):
        return np.maximum(self.mean_sq - self.mean**2, 0.0)


def _weights(levels, temperature):
    e = np.asarray(levels, dtype=float)
    t = np.asarray(temperature, dtype=float)
    if not np.all(t > 0):
        raise ValueError("temperature must be positive")
    shift = e.min(axis=-1)
    de = e - shift[..., None]
    # broadcast: levels (..., d) against temperatures (T,) -> (T, ..., d)
    kt = (KB_MHZ_PER_K * t).reshape(t.shape + (1,) * e.ndim)
    return np.exp(-de / kt), de, shift


def partition_and_moments(levels, temperature):
    """Z, <E>, <E^2> for levels (MHz) at each temperature; leading axes follow T."""
    w, de, shift = _weights(levels, temperature)
    z = w.sum(axis=-1)
    m1 = (w * de).sum(axis=-1) / z
    m2 = (w * de * de).sum(axis=-1) / z
    mean = m1 + shift
    mean_sq = m2 + 2 * shift * m1 + shift**2
    return Moments(z, mean, mean_sq, np.broadcast_to(shift, z.shape))


def heat_capacity_from_levels(levels, temperature):
    """c/k_B = Var(E) / (k_B T)^2, with the variance taken on shifted levels."""
    w, de, _ = _weights(levels, temperature)
    z = w.sum(axis=-1)
    m1 = (w * de).sum(axis=-1) / z
    var = (w * (de - m1[..., None]) ** 2).sum(axis=-1) / z
    t = np.asarray(temperature, dtype=float).reshape(np.shape(temperature) + (1,) * (var.ndim - np.ndim(temperature)))
    return var / (KB_MHZ_PER_K * t) ** 2


def entropy_from_levels(levels, temperature):
    """S/k_B = ln Z + <E>/k_B T on shifted levels."""
    w, de, _ = _weights(levels, temperature)
    z = w.sum(axis=-1)
    m1 = (w * de).sum(axis=-1) / z
    t = np.asarray(temperature, dtype=float).reshape(np.shape(temperature) + (1,) * (z.ndim - np.ndim(temperature)))
    return np.log(z) + m1 / (KB_MHZ_PER_K * t)


def _directions(direction_mol, n_orientations):
    if direction_mol is None:
        return golden_hemisphere(n_orientations)
    u = np.atleast_2d(np.asarray(direction_mol, dtype=float))
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def _spectrum(p, b, dirs):
    return np.linalg.eigvalsh(build_hamiltonian(p, b * dirs))


def heat_capacity(p, b, temperature, direction_mol=None, n_orientations=200):
    """Molar magnetic heat capacity c_m/R at field magnitude ``b`` (T).

    A single direction gives the single-crystal value; ``direction_mol=None``
    averages over a hemisphere grid (powder).
    """
    w = _spectrum(p, b, _directions(direction_mol, n_orientations))
    return heat_capacity_from_levels(w, temperature).mean(axis=-1)


def entropy(p, b, temperature, direction_mol=None, n_orientations=200):
    w = _spectrum(p, b, _directions(direction_mol, n_orientations))
    return entropy_from_levels(w, temperature).mean(axis=-1)


def magnetization(p, b, temperature, direction_mol=None, n_orientations=200):
    """Thermal <-dH/dB> along the field, in Bohr magnetons per molecule.

    ``b`` may be negative (field reversed along the same direction).
    """
    dirs = _directions(direction_mol, n_orientations)
    h = build_hamiltonian(p, b * dirs)
    w, v = np.linalg.eigh(h)
    dh = zeeman_derivative(p, dirs)  # (K, d, d)
    diag = np.real(np.einsum("kai,kab,kbi->ki", np.conj(v), dh, v))  # (K, d)
    wt, _, _ = _weights(w, temperature)  # (T, K, d)
    mean_dh = (wt * diag).sum(axis=-1) / wt.sum(axis=-1)
    return (-mean_dh / MUB_MHZ_PER_T).mean(axis=-1)


def susceptibility(p, temperature, b_probe=1e-3, direction_mol=None, n_orientations=200):
    """Molar susceptibility chi = N_A mu_B M / B (cm^3/mol) and chi*T."""
    m = magnetization(p, b_probe, temperature, direction_mol, n_orientations)
    chi = NA_MUB_EMU * m / (b_probe * GAUSS_PER_TESLA)
    return chi, chi * np.asarray(temperature, dtype=float)


def brillouin_half(b, temperature, g=1.98):
    """M (mu_B) of a free S = 1/2 with factor g: (g/2) tanh(g mu_B B / 2 k_B T)."""
    x = g * MUB_MHZ_PER_T * np.asarray(b, dtype=float) / (2.0 * KB_MHZ_PER_K * np.asarray(temperature, dtype=float))
    return 0.5 * g * np.tanh(x)


def ground_degeneracy(levels, tol=1e-6):
    e = np.sort(np.asarray(levels, dtype=float))
    return int(np.sum(e - e[0] <= tol))


def entropy_integral(p, b, t_min, t_max, direction_mol, n_points=4000):
    """Integral of (c/T) dT on a logarithmic grid (trapezoidal in ln T)."""
    t = np.geomspace(t_min, t_max, n_points)
    c = heat_capacity(p, b, t, direction_mol)
    return float(np.trapezoid(c, np.log(t)))


@dataclass(frozen=True)
class ThermoPoint:
    temperature: float
    field: float
    magnetization: float
    susceptibility: float
    heat_capacity: float
    entropy: float


def thermo_table(p, b, temperatures, direction_mol=None, n_orientations=200, b_probe=1e-3):
    """ThermoPoint per temperature; chi is the zero-field limit from ``b_probe``."""
    t = np.asarray(temperatures, dtype=float)
    c = heat_capacity(p, b, t, direction_mol, n_orientations)
    s = entropy(p, b, t, direction_mol, n_orientations)
    m = magnetization(p, b, t, direction_mol, n_orientations)
    chi, _ = susceptibility(p, t, b_probe, direction_mol, n_orientations)
    return [ThermoPoint(float(t[k]), float(b), float(m[k]), float(chi[k]), float(c[k]), float(s[k]))
            for k in range(t.size)]
