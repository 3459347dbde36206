"""Rabi matrices, addressable transitions and operation rates of the 16-level qudit.

A microwave field b_mw couples energy eigenstates through the electronic
Zeeman operator. Transitions that are strong enough (Rabi frequency above
1/T2) and spectrally isolated (separated from every other such transition by
more than the larger of the two Rabi frequencies) become edges of a graph
whose weights are pi-pulse durations. The rate W_nm for going from n to m is
the inverse of the fastest path between them.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .constants import MUB_MHZ_PER_T
from .hamiltonian import FieldPoint, FrameGeometry, build_hamiltonian, lab_axis_direction
from .spinops import product_space

FILTER_WIDTHS = ("max", "a", "sum")
AGGREGATIONS = ("sequential", "bottleneck")
DEFAULT_DRIVE_AXIS = "X"


def resolve_direction(axis, geom=None):
    """Molecular-frame unit vector from an axis name or an explicit 3-vector."""
    if isinstance(axis, str):
        return lab_axis_direction(geom or FrameGeometry(), axis)
    u = np.asarray(axis, dtype=float)
    n = np.linalg.norm(u)
    if u.shape != (3,) or n == 0:
        raise ValueError("direction must be a nonzero 3-vector")
    return u / n


def field_vector(field_point, geom=None):
    if isinstance(field_point, FieldPoint):
        return field_point.molecular_vector(geom)
    b = np.asarray(field_point, dtype=float)
    if b.shape != (3,):
        raise ValueError("field must be a FieldPoint or a molecular-frame 3-vector")
    return b


def drive_operator(p, drive_axis_mol, b_mw):
    """V = muB b_mw (g_perp (Sx ux + Sy uy) + g_par Sz uz) in MHz, b_mw in tesla.

    ``drive_axis_mol`` may be a stack ``(..., 3)`` of molecular-frame vectors.
    """
    ops = product_space(p.s, p.i)
    u = np.asarray(drive_axis_mol, dtype=float)
    e = (...,) + (None, None)
    return MUB_MHZ_PER_T * b_mw * (
        p.g_perp * (u[..., 0][e] * ops.sx + u[..., 1][e] * ops.sy)
        + p.g_par * u[..., 2][e] * ops.sz
    )


@dataclass(frozen=True)
class RabiMatrix:
    omega: np.ndarray  # (d, d) MHz
    frequency: np.ndarray  # (d, d) MHz, |E_j - E_i|
    energies: np.ndarray  # ascending, MHz
    field: np.ndarray  # molecular-frame field, T
    drive_axis: np.ndarray  # molecular-frame unit vector
    b_mw: float

    @property
    def dim(self):
        return self.omega.shape[0]


def rabi_matrix(p, field_point, drive_axis=DEFAULT_DRIVE_AXIS, b_mw=1e-3, geom=None,
                method="jacobi"):
    """Rabi frequencies Omega_ij = 2|<i|V|j>| between energy eigenstates."""
    if not b_mw > 0:
        raise ValueError("b_mw must be positive")
    geom = geom or FrameGeometry()
    b = field_vector(field_point, geom)
    u = resolve_direction(drive_axis, geom)
    w, v = linalg.eigh(build_hamiltonian(p, b), method=method)
    m = linalg.operator_in_basis(drive_operator(p, u, b_mw), v)
    omega = 2.0 * np.abs(m)
    omega = 0.5 * (omega + omega.T)
    np.fill_diagonal(omega, 0.0)
    freq = np.abs(w[:, None] - w[None, :])
    return RabiMatrix(omega, freq, w, b, u, float(b_mw))


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    omega: float  # MHz
    frequency: float  # MHz
    dt: float  # us


@dataclass(frozen=True)
class TransitionGraph:
    n_states: int
    edges: tuple
    excluded: dict = field(default_factory=dict)  # (i, j) -> "crowded" | "too-weak"

    def time_matrix(self):
        """Edge durations (us) with inf where no edge exists."""
        t = np.full((self.n_states, self.n_states), np.inf)
        for e in self.edges:
            t[e.i, e.j] = t[e.j, e.i] = min(t[e.i, e.j], e.dt)
        np.fill_diagonal(t, 0.0)
        return t

    def neighbours(self):
        adj = [[] for _ in range(self.n_states)]
        for e in self.edges:
            adj[e.i].append((e.j, e.dt))
            adj[e.j].append((e.i, e.dt))
        return adj


def _exclusion_width(om_a, om_b, width):
    if width == "max":
        return np.maximum(om_a, om_b)
    if width == "a":
        return np.broadcast_to(om_a, np.broadcast_shapes(np.shape(om_a), np.shape(om_b)))
    if width == "sum":
        return om_a + om_b
    raise ValueError(f"filter width must be one of {FILTER_WIDTHS}")


def addressable_transitions(rabi, omega_floor, width="max", pulse_factor=0.5):
    """Edges of the transition graph after the floor and crowding filters.

    A candidate (Omega >= omega_floor) is kept when its frequency differs from
    every other candidate's by more than the exclusion width. Kept transitions
    get a pulse time ``pulse_factor / Omega`` (us for Omega in MHz).
    """
    if omega_floor < 0:
        raise ValueError("omega_floor must be nonnegative")
    d = rabi.dim
    iu, ju = np.triu_indices(d, 1)
    om = rabi.omega[iu, ju]
    fr = rabi.frequency[iu, ju]
    cand = (om >= omega_floor) & (om > 0)
    ci, cj, co, cf = iu[cand], ju[cand], om[cand], fr[cand]

    sep = np.abs(cf[:, None] - cf[None, :])
    wid = _exclusion_width(co[:, None], co[None, :], width)
    clash = sep <= wid
    np.fill_diagonal(clash, False)
    keep = ~clash.any(axis=1)

    excluded = {}
    for a, b in zip(iu[~cand], ju[~cand]):
        excluded[(int(a), int(b))] = "too-weak"
    edges = []
    for k in range(co.size):
        key = (int(ci[k]), int(cj[k]))
        if keep[k]:
            edges.append(Edge(key[0], key[1], float(co[k]), float(cf[k]), pulse_factor / float(co[k])))
        else:
            excluded[key] = "crowded"
    return TransitionGraph(d, tuple(edges), excluded)


def fastest_times(graph, aggregation="sequential"):
    """All-pairs fastest path durations (us), Dijkstra from every vertex.

    ``sequential`` adds pulse times along the path, ``bottleneck`` takes the
    slowest pulse on the path (minimax path).
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
    combine = (lambda a, b: a + b) if aggregation == "sequential" else max
    adj = graph.neighbours()
    n = graph.n_states
    out = np.full((n, n), np.inf)
    for src in range(n):
        dist = out[src]
        dist[src] = 0.0
        heap = [(0.0, src)]
        done = np.zeros(n, dtype=bool)
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for v, dt in adj[u]:
                nd = combine(d, dt)
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
    # symmetrise away last-bit differences between the two search directions
    return np.minimum(out, out.T)


@dataclass(frozen=True)
class UniversalityReport:
    wt2: np.ndarray  # (d, d) W_nm * T2, 0 for disconnected pairs, diagonal inf
    disconnected: tuple  # (n, m) pairs with n < m
    min_wt2: float  # over connected pairs
    universal: bool
    edges: tuple
    t2: float
    aggregation: str

    @property
    def rates(self):
        return self.wt2 / self.t2


def operation_rates(graph, t2, aggregation="sequential"):
    if not t2 > 0:
        raise ValueError("t2 must be positive")
    times = fastest_times(graph, aggregation)
    n = graph.n_states
    with np.errstate(divide="ignore"):
        w = np.where(np.isfinite(times), 1.0 / times, 0.0)
    np.fill_diagonal(w, np.inf)
    wt2 = w * t2
    iu, ju = np.triu_indices(n, 1)
    connected = np.isfinite(times[iu, ju])
    disconnected = tuple((int(a), int(b)) for a, b in zip(iu[~connected], ju[~connected]))
    vals = wt2[iu, ju][connected]
    min_wt2 = float(vals.min()) if vals.size else 0.0
    universal = not disconnected and min_wt2 > 1.0
    return UniversalityReport(wt2, disconnected, min_wt2, universal, graph.edges, float(t2), aggregation)


@dataclass(frozen=True)
class QuditSettings:
    b_mw: float = 1e-3  # T
    t2: float = 5.0  # us
    drive_axis: object = DEFAULT_DRIVE_AXIS
    width: str = "max"
    aggregation: str = "sequential"
    pulse_factor: float = 0.5
    omega_floor: float | None = None  # MHz, defaults to 1/T2

    @property
    def floor(self):
        return 1.0 / self.t2 if self.omega_floor is None else self.omega_floor


def universality_report(p, field_point, settings=None, geom=None):
    s = settings or QuditSettings()
    rabi = rabi_matrix(p, field_point, s.drive_axis, s.b_mw, geom)
    graph = addressable_transitions(rabi, s.floor, s.width, s.pulse_factor)
    return operation_rates(graph, s.t2, s.aggregation)


@dataclass(frozen=True)
class UniversalityScan:
    fields: np.ndarray  # T
    min_wt2: np.ndarray
    n_disconnected: np.ndarray
    n_edges: np.ndarray
    universal: np.ndarray
    crossover: float | None  # first field (in grid order) that is not universal


def universality_scan(p, field_axis, b_grid, settings=None, geom=None):
    """min W*T2 versus field magnitude along ``field_axis``."""
    geom = geom or FrameGeometry()
    b_grid = np.asarray(b_grid, dtype=float)
    if b_grid.ndim != 1 or b_grid.size == 0:
        raise ValueError("b_grid must be a nonempty 1-D array")
    if b_grid.size > 1:
        steps = np.diff(b_grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError("b_grid must be strictly monotone")
    u = resolve_direction(field_axis, geom)
    reports = [universality_report(p, b * u, settings, geom) for b in b_grid]
    universal = np.array([r.universal for r in reports])
    crossover = None
    for b, ok in zip(b_grid, universal):
        if not ok:
            crossover = float(b)
            break
    return UniversalityScan(
        b_grid,
        np.array([r.min_wt2 for r in reports]),
        np.array([len(r.disconnected) for r in reports]),
        np.array([len(r.edges) for r in reports]),
        universal,
        crossover,
    )
