"""Intrinsic metrics, jump size, the Davies-type heat kernel bound and a
measure-decay test for the Feller property."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from heatgraph.graph import GraphOracle, Vertex, bfs_distances, weighted_degree
from heatgraph.heat import dirichlet_heat_kernel, exhaustion_domain


class IntrinsicMetric:
    """Path metric generated by positive edge lengths ``sigma(x, y)``.

    Distances are shortest weighted paths computed inside a combinatorial
    ball two steps larger than requested, so shortcuts through the explored
    region are seen while unexplored ones can only make ``rho`` an
    overestimate.
    """

    def __init__(self, graph: GraphOracle, edge_length: Callable[[Vertex, Vertex], float], name: str = "metric"):
        self.graph = graph
        self.edge_length = edge_length
        self.name = name
        self._cache: dict = {}

    def sigma(self, x: Vertex, y: Vertex) -> float:
        return float(self.edge_length(x, y))

    def scaled(self, factor: float) -> "IntrinsicMetric":
        """Metric with every edge length multiplied by ``factor``."""
        return IntrinsicMetric(self.graph, lambda x, y: factor * self.edge_length(x, y), f"{factor}*{self.name}")

    def distances(self, x: Vertex, radius: int) -> dict[Vertex, float]:
        """``rho(x, y)`` for every ``y`` with combinatorial distance ``<= radius``."""
        key = (x, radius)
        if key in self._cache:
            return self._cache[key]
        hops = bfs_distances(self.graph, x, radius + 2)
        best = {x: 0.0}
        heap = [(0.0, 0, x)]
        counter = 1  # tie-breaker: vertices need not be comparable
        done = set()
        while heap:
            d, _, v = heapq.heappop(heap)
            if v in done:
                continue
            done.add(v)
            for y, w in self.graph.neighbors(v):
                if w <= 0 or y not in hops:
                    continue
                nd = d + self.sigma(v, y)
                if nd < best.get(y, math.inf):
                    best[y] = nd
                    heapq.heappush(heap, (nd, counter, y))
                    counter += 1
        out = {y: best[y] for y, h in hops.items() if h <= radius}
        self._cache[key] = out
        return out

    def rho(self, x: Vertex, y: Vertex, radius: int | None = None) -> float:
        if radius is None:
            from heatgraph.graph import graph_distance

            radius = graph_distance(self.graph, x, y)
        return self.distances(x, radius)[y]


def degree_metric(g: GraphOracle) -> IntrinsicMetric:
    """Edge lengths ``max(Deg(x), Deg(y))^(-1/2)``."""
    return IntrinsicMetric(
        g, lambda x, y: max(weighted_degree(g, x), weighted_degree(g, y)) ** -0.5, name="degree"
    )


def ball(g: GraphOracle, x0: Vertex, R: int) -> list[Vertex]:
    return list(bfs_distances(g, x0, R))


def verify_intrinsic(g: GraphOracle, metric: IntrinsicMetric, region: Iterable[Vertex]) -> float:
    """``max_x sum_y b(x, y) rho(x, y)^2 - m(x)`` over ``region``; intrinsic iff ``<= 0``."""
    worst = -math.inf
    for x in region:
        rho = metric.distances(x, 1)
        s = sum(w * rho[y] ** 2 for y, w in g.neighbors(x))
        worst = max(worst, s - g.measure(x))
    return worst


def jump_size(g: GraphOracle, metric: IntrinsicMetric, region: Iterable[Vertex]) -> float:
    """Largest edge length over edges touching ``region``."""
    return max(metric.sigma(x, y) for x in region for y, w in g.neighbors(x) if w > 0)


def zeta(j: float, t: float, r: float) -> float:
    """``(1/j^2) (j r arsinh(j r / t) - sqrt(t^2 + (j r)^2) + t)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    if j <= 0:
        raise ValueError("j must be positive")
    if r < 0:
        raise ValueError("r must be nonnegative")
    jr = j * r
    return (jr * math.asinh(jr / t) - math.hypot(t, jr) + t) / (j * j)


def davies_bound(m_x: float, m_y: float, j: float, t: float, rho: float) -> float:
    return math.exp(-zeta(j, t, rho)) / math.sqrt(m_x * m_y)


def davies_bound_residual(
    g: GraphOracle,
    metric: IntrinsicMetric,
    j: float,
    x: Vertex,
    y: Vertex,
    t: float,
    Rdomain: int = 24,
) -> float:
    """``p_t(x, y) - exp(-zeta_j(t, rho(x, y))) / sqrt(m(x) m(y))``; ``<= 0`` when the bound holds.

    ``p_t`` is the Dirichlet kernel on ``B_Rdomain(x)``, a lower bound that
    is exact up to the (super-exponentially small) loss at the boundary.
    """
    d = exhaustion_domain(g, x, Rdomain)
    p = dirichlet_heat_kernel(d, t)[d.index[x], d.index[y]]
    from heatgraph.graph import graph_distance

    rho = metric.rho(x, y, graph_distance(g, x, y))
    return float(p) - davies_bound(g.measure(x), g.measure(y), j, t, rho)


def davies_table(
    g: GraphOracle,
    metric: IntrinsicMetric,
    j: float,
    x0: Vertex,
    R: int,
    ts: Sequence[float],
    margin: int = 16,
) -> list[tuple[Vertex, Vertex, float, float, float]]:
    """Rows ``(x, y, t, p_t(x,y), residual)`` for all pairs in ``B_R(x0)``.

    One domain ``B_{R+margin}(x0)`` supplies all kernels.
    """
    d = exhaustion_domain(g, x0, R + margin)
    verts = ball(g, x0, R)
    rhos = {x: metric.distances(x, 2 * R) for x in verts}
    rows = []
    for t in ts:
        P = dirichlet_heat_kernel(d, t)
        for x in verts:
            for y in verts:
                p = float(P[d.index[x], d.index[y]])
                res = p - davies_bound(g.measure(x), g.measure(y), j, t, rhos[x][y])
                rows.append((x, y, float(t), p, res))
    return rows


@dataclass
class FellerRow:
    y: Vertex
    rho: float
    lhs: float  # -log m(y)
    rhs: float  # (2 rho / j)(log rho + C)
    passed: bool
    C_needed: float  # smallest C making this row pass


@dataclass
class Feller2Report:
    C: float
    j: float
    rows: list[FellerRow] = field(default_factory=list)
    skipped: list[Vertex] = field(default_factory=list)
    note: str = ""

    @property
    def failures(self) -> list[FellerRow]:
        return [r for r in self.rows if not r.passed]

    @property
    def passed(self) -> bool:
        return bool(self.rows) and not self.failures

    @property
    def minimal_C(self) -> float:
        return max((r.C_needed for r in self.rows), default=-math.inf)


def feller2_check(
    g: GraphOracle,
    metric: IntrinsicMetric,
    j: float,
    x0: Vertex,
    C: float,
    R: int,
) -> Feller2Report:
    """Check ``-log m(y) <= (2 rho(x0,y) / j)(log rho(x0,y) + C)`` on ``B_R \\ B_1``.

    Rows with ``rho <= 1`` are skipped (the logarithm is nonpositive there).
    """
    hops = bfs_distances(g, x0, R)
    rho = metric.distances(x0, R)
    rep = Feller2Report(C, j)
    for y, h in hops.items():
        if h <= 1:
            continue
        r = rho[y]
        if r <= 1:
            rep.skipped.append(y)
            continue
        lhs = -math.log(g.measure(y))
        rhs = (2 * r / j) * (math.log(r) + C)
        need = lhs * j / (2 * r) - math.log(r)
        rep.rows.append(FellerRow(y, r, lhs, rhs, lhs <= rhs, need))
    if rep.skipped:
        rep.note = f"{len(rep.skipped)} vertices with rho <= 1 skipped"
    return rep


def properness_evidence(g: GraphOracle, metric: IntrinsicMetric, x0: Vertex, R: int) -> list[float]:
    """Minimum of ``rho(x0, .)`` on each combinatorial sphere ``S_1..S_R``.

    Growth without bound is evidence that metric balls are finite.
    """
    hops = bfs_distances(g, x0, R)
    rho = metric.distances(x0, R)
    mins = [math.inf] * (R + 1)
    for y, h in hops.items():
        mins[h] = min(mins[h], rho[y])
    return mins[1:]
