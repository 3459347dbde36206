"""Angular-momentum matrices and the electron ⊗ nucleus product space.

Basis states are ordered m = +j, j-1, ..., -j. In the product space the
electron factor comes first, so product index ``k = 8*e + n`` for
``S=1/2, I=7/2`` (e = 0 is m_S = +1/2, n = 0 is m_I = +7/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .linalg import DimensionMismatch, kron


class InvalidSpin(ValueError):
    pass


@dataclass(frozen=True)
class SpinOperators:
    j: float
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jplus: np.ndarray
    jminus: np.ndarray

    @property
    def dim(self):
        return self.jz.shape[0]

    @property
    def m(self):
        return np.real(np.diag(self.jz))

    def component(self, axis):
        return {"x": self.jx, "y": self.jy, "z": self.jz}[axis]


def _as_half_integer(j):
    two_j = Fraction(j).limit_denominator(1000) * 2
    if two_j.denominator != 1 or two_j < 0 or abs(float(two_j) - 2 * float(j)) > 1e-12:
        raise InvalidSpin(f"2j must be a nonnegative integer, got j={j!r}")
    return int(two_j)


@lru_cache(maxsize=None)
def _spin_operators(two_j):
    j = two_j / 2
    m = j - np.arange(two_j + 1)
    # <m+1|j+|m> = sqrt(j(j+1) - m(m+1)) sits on the first superdiagonal
    jplus = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    jminus = jplus.T.copy()
    jx = 0.5 * (jplus + jminus)
    jy = (jplus - jminus) / 2j
    jz = np.diag(m).astype(complex)
    for arr in (jplus, jminus, jx, jy, jz):
        arr.setflags(write=False)
    return SpinOperators(j, jx, jy, jz, jplus, jminus)


def spin_operators(j):
    return _spin_operators(_as_half_integer(j))


def embed(electron_op=None, nuclear_op=None, s=0.5, i=3.5):
    """Electron ⊗ nucleus operator; ``None`` stands for the identity."""
    de = int(round(2 * s + 1))
    dn = int(round(2 * i + 1))
    e = np.eye(de) if electron_op is None else np.asarray(electron_op)
    n = np.eye(dn) if nuclear_op is None else np.asarray(nuclear_op)
    if e.shape != (de, de):
        raise DimensionMismatch(f"electron operator must be {de}x{de}, got {e.shape}")
    if n.shape != (dn, dn):
        raise DimensionMismatch(f"nuclear operator must be {dn}x{dn}, got {n.shape}")
    return kron(e, n)


@dataclass(frozen=True)
class ProductSpace:
    """Embedded electron (S) and nuclear (I) Cartesian operators."""

    s: float
    i: float
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    iz: np.ndarray

    @property
    def dim(self):
        return self.sz.shape[0]

    @property
    def s_vec(self):
        return (self.sx, self.sy, self.sz)

    @property
    def i_vec(self):
        return (self.ix, self.iy, self.iz)

    def labels(self):
        """(m_S, m_I) for each product-basis index."""
        ms = spin_operators(self.s).m
        mi = spin_operators(self.i).m
        return [(a, b) for a in ms for b in mi]


@lru_cache(maxsize=None)
def _product_space(two_s, two_i):
    s, i = two_s / 2, two_i / 2
    so = _spin_operators(two_s)
    io = _spin_operators(two_i)
    ops = [embed(so.component(a), None, s, i) for a in "xyz"]
    ops += [embed(None, io.component(a), s, i) for a in "xyz"]
    for arr in ops:
        arr.setflags(write=False)
    return ProductSpace(s, i, *ops)


def product_space(s=0.5, i=3.5):
    return _product_space(_as_half_integer(s), _as_half_integer(i))
