"""Small dense complex linear algebra.

Hermitian eigendecomposition by cyclic complex Jacobi rotations, Kronecker
products and matrix elements. Every routine accepts a single matrix or a
stack of matrices with shape ``(..., n, n)``; the Jacobi sweep is vectorised
over the stack so that field/orientation grids can be diagonalised in one
call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_SWEEPS = 100
HERMITIAN_RTOL = 1e-9


class NotHermitian(ValueError):
    pass


class NotConverged(RuntimeError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class HermitianEigenDecomposition:
    """Eigenvalues in ascending order and the matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __iter__(self):
        # allows ``w, v = eigh(h)``
        return iter((self.eigenvalues, self.eigenvectors))


def kron(a, b):
    """Kronecker product, ``(A⊗B)[i*rb+k, j*cb+l] = A[i,j] * B[k,l]``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatch("kron expects two 2-D matrices")
    ra, ca = a.shape
    rb, cb = b.shape
    out = a[:, None, :, None] * b[None, :, None, :]
    return out.reshape(ra * rb, ca * cb)


def max_abs(m):
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def hermiticity_error(h):
    h = np.asarray(h)
    return float(np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2)))))


def _check_hermitian(h, rtol):
    if h.shape[-1] != h.shape[-2]:
        raise DimensionMismatch(f"matrix is not square: {h.shape[-2:]}")
    dev = np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))), axis=(-2, -1))
    scale = np.max(np.abs(h), axis=(-2, -1))
    bad = dev > rtol * scale
    if np.any(bad):
        worst = float(np.max(dev[bad] / scale[bad]))
        raise NotHermitian(f"relative hermiticity defect {worst:.3e} exceeds {rtol:g}")


def _offdiag_norm2(a):
    n = a.shape[-1]
    off = ~np.eye(n, dtype=bool)
    return np.sum(np.abs(a[:, off]) ** 2, axis=-1)


def _jacobi(h, max_sweeps=MAX_SWEEPS):
    """Cyclic complex Jacobi on a stack ``(N, n, n)``; returns (w, v, sweeps)."""
    a = 0.5 * (h + np.conj(np.swapaxes(h, -1, -2)))
    a = a.astype(np.complex128, copy=True)
    nstack, n, _ = a.shape
    v = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape).copy()
    # relative stopping threshold on the off-diagonal Frobenius norm
    scale2 = np.sum(np.abs(a) ** 2, axis=(-2, -1))
    eps2 = (4.0 * np.finfo(float).eps) ** 2 * np.maximum(scale2, np.finfo(float).tiny)
    # elements below this are left alone (they cannot change any result)
    negligible = 1e-30 * np.sqrt(scale2)

    sweeps = 0
    while True:
        off = _offdiag_norm2(a)
        if np.all(off <= eps2):
            break
        if sweeps >= max_sweeps:
            raise NotConverged(f"Jacobi did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                mag = np.abs(apq)
                active = mag > negligible
                if not np.any(active):
                    continue
                app = a[:, p, p].real.copy()
                aqq = a[:, q, q].real.copy()
                safe = np.where(active, mag, 1.0)
                theta = (aqq - app) / (2.0 * safe)
                sgn = np.where(theta >= 0.0, 1.0, -1.0)
                t = sgn / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                phase = np.where(active, np.conj(apq) / safe, 1.0)  # exp(-i arg a_pq)

                c_ = c[:, None]
                s_ = s[:, None]
                ph = phase[:, None]
                # columns: A <- A U
                colp = a[:, :, p].copy()
                colq = a[:, :, q]
                a[:, :, p] = c_ * colp - s_ * ph * colq
                a[:, :, q] = s_ * colp + c_ * ph * colq
                # rows: A <- U^H A
                rowp = a[:, p, :].copy()
                rowq = a[:, q, :]
                a[:, p, :] = c_ * rowp - s_ * np.conj(ph) * rowq
                a[:, q, :] = s_ * rowp + c_ * np.conj(ph) * rowq
                a[:, p, q] = 0.0
                a[:, q, p] = 0.0
                a[:, p, p] = app - t * mag
                a[:, q, q] = aqq + t * mag
                vp = v[:, :, p].copy()
                vq = v[:, :, q]
                v[:, :, p] = c_ * vp - s_ * ph * vq
                v[:, :, q] = s_ * vp + c_ * ph * vq

    w = np.real(a[:, np.arange(n), np.arange(n)])
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    return w, v, sweeps


def eigh(h, method="jacobi", check=True):
    """Eigendecomposition of a Hermitian matrix or a stack of them.

    ``method="jacobi"`` runs the cyclic Jacobi sweep implemented here.
    ``method="lapack"`` delegates to :func:`numpy.linalg.eigh` and is used for
    the large field scans where throughput matters.
    """
    h = np.asarray(h)
    if h.ndim < 2:
        raise DimensionMismatch("eigh expects a matrix or a stack of matrices")
    if check:
        _check_hermitian(h, HERMITIAN_RTOL)
    lead = h.shape[:-2]
    n = h.shape[-1]
    flat = h.reshape((-1, n, n))
    if method == "jacobi":
        w, v, _ = _jacobi(flat)
    elif method == "lapack":
        herm = 0.5 * (flat + np.conj(np.swapaxes(flat, -1, -2)))
        w, v = np.linalg.eigh(herm)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    return HermitianEigenDecomposition(w.reshape(lead + (n,)), v.reshape(lead + (n, n)))


def eigvalsh(h, method="jacobi", check=True):
    h = np.asarray(h)
    if method == "lapack":
        if check:
            _check_hermitian(h, HERMITIAN_RTOL)
        return np.linalg.eigvalsh(0.5 * (h + np.conj(np.swapaxes(h, -1, -2))))
    return eigh(h, method=method, check=check).eigenvalues


def matrix_element(bra, op, ket):
    """``bra† · op · ket`` for vectors (or stacks of vectors along axis -1)."""
    bra = np.asarray(bra)
    op = np.asarray(op)
    ket = np.asarray(ket)
    if op.shape[-1] != ket.shape[-1] or op.shape[-2] != bra.shape[-1]:
        raise DimensionMismatch(
            f"cannot form <{bra.shape}|{op.shape}|{ket.shape}>"
        )
    return np.einsum("...i,...ij,...j->...", np.conj(bra), op, ket)


def operator_in_basis(op, vectors):
    """Matrix of ``op`` between the columns of ``vectors``: ``V† op V``."""
    vectors = np.asarray(vectors)
    return np.conj(np.swapaxes(vectors, -1, -2)) @ np.asarray(op) @ vectors
