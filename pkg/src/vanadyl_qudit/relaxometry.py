"""Relaxation and ac-susceptibility models with a Levenberg-Marquardt fitter.

Time traces use microseconds, Cole-Cole traces use frequency in Hz, and the
rate laws take T (K) or T/B (K/T) and return 1/T1 in s^-1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    pass


class SingularJacobian(RuntimeError):
    pass


class MaxIterations(RuntimeError):
    pass


def _inversion_recovery(x, y_inf, y0, t1, beta):
    return y_inf - y0 * np.exp(-((x / (beta * t1)) ** beta))


def _hahn(x, y0, a, t2, beta):
    return y0 + a * np.exp(-((2.0 * x / t2) ** beta))


def _exp_modulation(x, y0, a, t2, k, td, nu, phi0):
    # phi0 is the modulation phase (a constant offset would duplicate y0); nu in MHz, x in us
    return y0 + a * (np.exp(-2.0 * x / t2) + k * np.exp(-2.0 * x / td) * np.cos(2 * np.pi * nu * x + phi0))


def cole_cole(freq_hz, chi_s, chi_t, tau, beta):
    """chi' - i chi'' = chi_S + (chi_T - chi_S) / (1 + (i omega tau)^beta)."""
    w = 2.0 * np.pi * np.asarray(freq_hz, dtype=float)
    return chi_s + (chi_t - chi_s) / (1.0 + (1j * w * tau) ** beta)


def _t1_temp_law(x, a, c, n):
    return a * x + c * x**n


def _t1_field_scaled(x, a, c):
    return a * x + c * x**3


@dataclass(frozen=True)
class _Kind:
    names: tuple
    lower: tuple
    upper: tuple
    func: object
    is_complex: bool = False
    defaults_fixed: tuple = ()


INF = math.inf
KINDS = {
    "InversionRecoveryStretched": _Kind(
        ("y_inf", "y0", "t1", "beta"), (-INF, -INF, 0.0, 0.0), (INF, INF, INF, 2.0), _inversion_recovery
    ),
    "HahnStretched": _Kind(
        ("y0", "a", "t2", "beta"), (-INF, -INF, 0.0, 0.0), (INF, INF, INF, 4.0), _hahn
    ),
    "ExpWithModulation": _Kind(
        ("y0", "a", "t2", "k", "td", "nu", "phi0"),
        (-INF, -INF, 0.0, -INF, 0.0, 0.0, -INF),
        (INF, INF, INF, INF, INF, INF, INF),
        _exp_modulation,
    ),
    "ColeCole": _Kind(
        ("chi_s", "chi_t", "tau", "beta"), (-INF, -INF, 0.0, 0.0), (INF, INF, INF, 1.0), cole_cole, True
    ),
    "T1TempLaw": _Kind(("a", "c", "n"), (-INF, -INF, 0.0), (INF, INF, INF), _t1_temp_law, False, ("n",)),
    "T1FieldScaledLaw": _Kind(("a", "c"), (-INF, -INF), (INF, INF), _t1_field_scaled),
}


@dataclass(frozen=True)
class FitModel:
    """A model kind plus the names of parameters held fixed during a fit."""

    kind: str
    fixed: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; choose from {sorted(KINDS)}")
        fixed = KINDS[self.kind].defaults_fixed if self.fixed is None else tuple(self.fixed)
        bad = set(fixed) - set(KINDS[self.kind].names)
        if bad:
            raise ValueError(f"unknown fixed parameter(s) {sorted(bad)}")
        object.__setattr__(self, "fixed", fixed)

    @property
    def names(self):
        return KINDS[self.kind].names

    @property
    def lower(self):
        return np.array(KINDS[self.kind].lower)

    @property
    def upper(self):
        return np.array(KINDS[self.kind].upper)

    @property
    def is_complex(self):
        return KINDS[self.kind].is_complex

    @property
    def free_mask(self):
        return np.array([n not in self.fixed for n in self.names])

    def as_array(self, params):
        if isinstance(params, dict):
            missing = set(self.names) - set(params)
            if missing:
                raise ValueError(f"missing parameters {sorted(missing)}")
            return np.array([float(params[n]) for n in self.names])
        arr = np.asarray(params, dtype=float)
        if arr.shape != (len(self.names),):
            raise ValueError(f"{self.kind} takes {len(self.names)} parameters {self.names}")
        return arr


def check_domain(model, params):
    p = model.as_array(params)
    if not np.all(np.isfinite(p)):
        raise DomainError("parameters must be finite")
    lo, hi = model.lower, model.upper
    for name, v, a, b in zip(model.names, p, lo, hi):
        # time constants and exponents are strictly positive
        if a == 0.0 and v <= 0.0:
            raise DomainError(f"{name} must be positive, got {v}")
        if v < a or v > b:
            raise DomainError(f"{name}={v} outside [{a}, {b}]")
    return p


def model_eval(model, params, x):
    p = check_domain(model, params)
    x = np.asarray(x, dtype=float)
    if model.kind in ("InversionRecoveryStretched", "HahnStretched", "ExpWithModulation") and np.any(x < 0):
        raise DomainError("time axis must be nonnegative")
    return KINDS[model.kind].func(x, *p)


def mean_t1_from_stretched(t1_char, beta):
    """Mean relaxation time of exp(-(t/(beta T1))^beta): T1 * Gamma(1/beta).

    The decay time of the stretched exponential is tau = beta*T1 and its mean
    is (tau/beta) Gamma(1/beta), which reduces to T1 for beta = 1.
    """
    if not (t1_char > 0):
        raise DomainError("T1 must be positive")
    if not (0 < beta <= 2):
        raise DomainError("beta must lie in (0, 2]")
    return t1_char * math.gamma(1.0 / beta)


MEAN_T1_CONVENTION = "y = y_inf - y0*exp(-(t/(beta*T1))^beta); <T1> = T1*Gamma(1/beta)"


# ---------------------------------------------------------------- fitting


@dataclass(frozen=True)
class DecayTrace:
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise ValueError("x must be strictly increasing")
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != x.shape or np.any(s <= 0):
                raise ValueError("sigma must be positive and match x")
            object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class FitResult:
    model: FitModel
    params: dict
    stderr: dict | None
    rss: float
    converged: bool
    iterations: int
    history: tuple = field(default=(), repr=False)  # RSS after each accepted step


@dataclass(frozen=True)
class LMSettings:
    max_iter: int = 500
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    lambda_max: float = 1e16
    fd_step: float = 1e-6  # relative
    xtol: float = 1e-12
    ftol: float = 1e-15


def _residuals(model, p, trace):
    y = model_eval(model, p, trace.x)
    r = y - trace.y
    if trace.sigma is not None:
        r = r / trace.sigma
    if np.iscomplexobj(r):
        r = np.concatenate([r.real, r.imag])
    return np.asarray(r, dtype=float)


def _jacobian(model, p, free, trace, r0, step):
    cols = []
    for k in np.flatnonzero(free):
        h = step * max(abs(p[k]), 1e-3)
        up, dn = p.copy(), p.copy()
        up[k] += h
        dn[k] -= h
        # fall back to a one-sided difference at a domain boundary
        try:
            rp = _residuals(model, up, trace)
        except DomainError:
            rp, up = r0, p
        try:
            rm = _residuals(model, dn, trace)
        except DomainError:
            rm, dn = r0, p
        cols.append((rp - rm) / (up[k] - dn[k]))
    return np.stack(cols, axis=1)


def fit(model, trace, initial_params, settings=None, raise_on_max_iter=True):
    """Levenberg-Marquardt least squares with Marquardt diagonal scaling."""
    s = settings or LMSettings()
    p = check_domain(model, initial_params).copy()
    free = model.free_mask
    n_free = int(free.sum())
    n_res = trace.x.size * (2 if model.is_complex else 1)
    if trace.x.size <= n_free:
        raise ValueError("trace must have more points than free parameters")

    r = _residuals(model, p, trace)
    rss = float(r @ r)
    lam = s.lambda0
    history = [rss]
    converged = False
    it = 0
    while it < s.max_iter:
        it += 1
        jac = _jacobian(model, p, free, trace, r, s.fd_step)
        if not np.all(np.isfinite(jac)) or not np.any(jac):
            raise SingularJacobian("Jacobian is zero or not finite")
        a = jac.T @ jac
        g = jac.T @ r
        diag = np.diag(a).copy()
        diag[diag <= 0] = np.finfo(float).eps * max(diag.max(), 1.0)
        accepted = False
        while lam <= s.lambda_max:
            try:
                step = np.linalg.solve(a + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= s.lambda_up
                continue
            trial = p.copy()
            trial[free] += step
            trial = np.clip(trial, model.lower, model.upper)
            try:
                rt = _residuals(model, trial, trace)
            except DomainError:
                lam *= s.lambda_up
                continue
            rss_t = float(rt @ rt)
            if np.isfinite(rss_t) and rss_t < rss:
                accepted = True
                break
            lam *= s.lambda_up
        if not accepted:
            # no downhill step at any damping: a stationary point
            converged = True
            break
        dx = np.abs(trial - p)
        drss = rss - rss_t
        p, r, rss = trial, rt, rss_t
        history.append(rss)
        lam = max(lam / s.lambda_down, 1e-15)
        if rss == 0.0 or drss <= s.ftol * rss or np.all(dx <= s.xtol * (np.abs(p) + s.xtol)):
            converged = True
            break
    if not converged and raise_on_max_iter:
        raise MaxIterations(f"no convergence after {s.max_iter} iterations")

    stderr = None
    if converged:
        jac = _jacobian(model, p, free, trace, r, s.fd_step)
        stderr = _standard_errors(model, jac, rss, n_res, free)
    params = dict(zip(model.names, map(float, p)))
    return FitResult(model, params, stderr, rss, converged, it, tuple(history))


def _standard_errors(model, jac, rss, n_res, free):
    dof = max(n_res - int(free.sum()), 1)
    s2 = rss / dof
    a = jac.T @ jac
    w, v = np.linalg.eigh(a)
    tol = max(w.max(), 0.0) * 1e-12
    good = w > tol
    cov = (v[:, good] / w[good]) @ v[:, good].T * s2
    var = np.diag(cov).copy()
    # parameters touching a flat direction are undetermined
    flat = np.any(np.abs(v[:, ~good]) > 1e-6, axis=1) if (~good).any() else np.zeros(len(var), bool)
    var[flat] = np.inf
    out = {}
    k = 0
    for name, is_free in zip(model.names, free):
        if is_free:
            out[name] = float(np.sqrt(max(var[k], 0.0)))
            k += 1
        else:
            out[name] = 0.0
    return out


def read_trace_csv(path, complex_y=False):
    """CSV with header ``x,y[,sigma]``; ColeCole traces use ``x,y,y_im``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    x = np.array([float(r["x"]) for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    if complex_y or "y_im" in rows[0]:
        # stored as chi' and chi''; the model value is chi' - i chi''
        y = y - 1j * np.array([float(r["y_im"]) for r in rows])
    sigma = None
    if "sigma" in rows[0] and rows[0]["sigma"] not in ("", None):
        sigma = np.array([float(r["sigma"]) for r in rows])
    return DecayTrace(x, y, sigma)


# Table S3-like parameter sets (6 K row where applicable) and sampling grids
SYNTHETIC = {
    "InversionRecoveryStretched": ((1.0, 2.0, 52573.0, 0.534), ("geom", 10.0, 1e6, 200)),
    "HahnStretched": ((0.01, 1.0, 3.76, 1.05), ("lin", 0.1, 12.0, 120)),
    "ExpWithModulation": ((0.02, 1.0, 3.76, 0.1, 8.0, 0.12, 0.3), ("lin", 0.1, 20.0, 400)),
    "ColeCole": ((0.1, 1.0, 1e-3, 0.85), ("geom", 1.0, 1e5, 100)),
    "T1TempLaw": ((2.2, 0.029, 3.0), ("lin", 6.0, 120.0, 30)),
    "T1FieldScaledLaw": ((0.324, 0.0145), ("lin", 1.0, 300.0, 30)),
}


def synthetic_trace(kind, params=None):
    """Noiseless trace of ``kind`` at the built-in (or given) parameters."""
    true, (spacing, a, b, n) = SYNTHETIC[kind]
    p = true if params is None else params
    x = np.geomspace(a, b, n) if spacing == "geom" else np.linspace(a, b, n)
    model = FitModel(kind)
    return DecayTrace(x, model_eval(model, p, x)), dict(zip(model.names, map(float, p)))
