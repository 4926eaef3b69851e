"""Feller-property criteria: inner-degree series, radial certificates and probes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from heatgraph.graph import (
    BirthDeathChain,
    GraphOracle,
    Vertex,
    _as_callable,
    bfs_distances,
    sphere_profiles,
    weighted_degree,
)
from heatgraph.heat import _kernel_column, exhaustion_domain
from heatgraph.series import CONVERGES, DIVERGES, INCONCLUSIVE, classify_tail

VANISH_THRESHOLD = 0.01


@dataclass
class SeriesReport:
    terms: list[float]
    partial_sums: list[float]
    tail_ratio: float
    verdict: str
    exponent: float = math.nan
    note: str = ""

    @classmethod
    def from_terms(cls, terms: Sequence[float], note: str = "", index=None) -> "SeriesReport":
        terms = [float(a) for a in terms]
        partial = list(np.cumsum(terms)) if terms else []
        ratio = terms[-1] / terms[-2] if len(terms) >= 2 and terms[-2] != 0 else math.nan
        fit = classify_tail(terms, index)
        return cls(terms, [float(s) for s in partial], ratio, fit.verdict, fit.exponent, note)


def _profiles_or_note(g, x0, rmax):
    profiles = sphere_profiles(g, x0, rmax)
    live = []
    for p in profiles:
        if p.empty:
            return live, f"sphere S_{p.radius} is empty: finite graph exhausted"
        live.append(p)
    return live, ""


def series_inner_degree(g: GraphOracle, x0: Vertex | None = None, Rmax: int = 50) -> SeriesReport:
    """Terms ``1 / D_-(r)``; divergence of their sum gives the Feller property."""
    if Rmax < 2:
        raise ValueError("Rmax must be at least 2")
    x0 = g.root if x0 is None else x0
    profiles, note = _profiles_or_note(g, x0, Rmax)
    terms = [1.0 / p.Dminus for p in profiles]
    if note:
        # finite graphs are trivially Feller
        rep = SeriesReport.from_terms(terms, note)
        rep.verdict = DIVERGES
        return rep
    return SeriesReport.from_terms(terms, index=[p.radius for p in profiles])


def series_nonfeller(g: GraphOracle, x0: Vertex | None = None, Rmax: int = 50) -> SeriesReport:
    """Terms ``(D(r) - d_-(r) + 1) / d_-(r)``; convergence rules out the Feller property."""
    if Rmax < 2:
        raise ValueError("Rmax must be at least 2")
    x0 = g.root if x0 is None else x0
    profiles, note = _profiles_or_note(g, x0, Rmax)
    terms = [(p.D - p.dminus + 1.0) / p.dminus for p in profiles]
    if note:
        rep = SeriesReport.from_terms(terms, note)
        rep.verdict = DIVERGES
        return rep
    return SeriesReport.from_terms(terms, index=[p.radius for p in profiles])


# --- radial certificates --------------------------------------------------------------


def _sequence(f, rmax: int) -> list[float]:
    """Values ``f(1..rmax)`` from a callable or a sequence indexed from 1."""
    if callable(f):
        return [float(f(r)) for r in range(1, rmax + 1)]
    vals = [float(v) for v in f]
    if len(vals) < rmax:
        raise ValueError(f"need {rmax} values, got {len(vals)}")
    return vals[:rmax]


@dataclass
class CertificateReport:
    values: list[float]  # v(0..Rmax)
    vanishing: bool
    min_residual: float = math.nan  # min over checked vertices of Lv - lambda v
    checked: int = 0
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.checked > 0 and self.min_residual >= -1e-12


def certificate_v(
    dminus_max: Callable[[int], float] | Sequence[float],
    lam: float,
    Rmax: int,
    graph: GraphOracle | None = None,
    x0: Vertex | None = None,
) -> CertificateReport:
    """Radial function ``v(r) = prod_{i<=r} D_-(i) / (D_-(i) - lam)``.

    When ``graph`` is given the inequality ``Lv >= lam v`` is checked at every
    vertex of ``B_{Rmax-1}(x0)``.  ``v`` counts as vanishing when
    ``v(Rmax) < 0.01 v(0)`` and it decreases throughout.
    """
    if lam >= 0:
        raise ValueError("lambda must be negative")
    D = _sequence(dminus_max, Rmax)
    if any(d <= 0 for d in D):
        raise ValueError("D_-(r) must be positive")
    v = [1.0]
    for d in D:
        v.append(v[-1] * d / (d - lam))
    decreasing = all(b < a for a, b in zip(v, v[1:]))
    rep = CertificateReport(v, decreasing and v[-1] < VANISH_THRESHOLD * v[0])
    if graph is not None:
        x0 = graph.root if x0 is None else x0
        dist = bfs_distances(graph, x0, Rmax)
        worst = math.inf
        for x, r in dist.items():
            if r > Rmax - 1:
                continue
            lv = sum(w * (v[r] - v[dist[y]]) for y, w in graph.neighbors(x)) / graph.measure(x)
            worst = min(worst, lv - lam * v[r])
            rep.checked += 1
        rep.min_residual = worst
    return rep


@dataclass
class ComparisonReport:
    values: list[float]  # w(0..Rmax)
    epsilon: float  # min_r w(r) / v0 over the window
    bounded_below: bool
    product_series: SeriesReport | None = None


def comparison_w(
    D: Callable[[int], float] | Sequence[float],
    dminus: Callable[[int], float] | Sequence[float],
    lam: float,
    v0: float,
    Rmax: int,
) -> ComparisonReport:
    """Lower comparison ``w(r) = v0 prod_{i<=r} d_-(i) / (D(i) - lam)``.

    ``w`` stays bounded below (non-vanishing evidence) when the series of
    ``-log`` factors is classified convergent.
    """
    if lam >= 0:
        raise ValueError("lambda must be negative")
    if v0 <= 0:
        raise ValueError("v0 must be positive")
    Dv = _sequence(D, Rmax)
    dv = _sequence(dminus, Rmax)
    w = [float(v0)]
    logs = []
    for big, small in zip(Dv, dv):
        f = small / (big - lam)
        w.append(w[-1] * f)
        logs.append(-math.log(f))
    series = SeriesReport.from_terms(logs)
    eps = min(w) / v0
    return ComparisonReport(w, eps, series.verdict == CONVERGES and eps > 0, series)


# --- birth-death chains ---------------------------------------------------------------------


@dataclass
class BirthDeathReport:
    conductance_series: SeriesReport  # sum 1 / b(r, r+1), must diverge
    tail_series: SeriesReport  # sum m({r, r+1, ...}) / b(r, r-1), must converge
    verdict: str  # "non-Feller-suspected", "fails" or "inconclusive"


def _tails(m: Callable[[int], float], rmax: int, horizon: int) -> list[float]:
    """``m({r, r+1, ...})`` for ``r = 1..rmax``; ``inf`` when the measure series diverges."""
    vals = [float(m(k)) for k in range(horizon + 1)]
    # a measure that underflows to zero has a tail below double precision there
    if 0.0 in vals[1:]:
        cut = vals.index(0.0, 1)
        if cut > rmax + 1 and all(v == 0.0 for v in vals[cut:]):
            horizon = cut - 1
            vals = vals[:cut]
    fit = classify_tail(vals[1:], range(1, horizon + 1))
    if fit.verdict != CONVERGES:
        return [math.inf] * rmax
    # geometric extrapolation of the remainder beyond the horizon
    rest = 0.0
    if vals[-2] > 0 and 0 < vals[-1] / vals[-2] < 1:
        q = vals[-1] / vals[-2]
        rest = vals[-1] * q / (1 - q)
    # accumulate from the far end so small tails do not cancel
    suffix = [0.0] * (horizon + 2)
    suffix[horizon + 1] = rest
    for k in range(horizon, -1, -1):
        suffix[k] = suffix[k + 1] + vals[k]
    return suffix[1 : rmax + 1]


def birth_death_nonfeller(chain=None, *, b=None, m=None, Rmax: int = 60) -> BirthDeathReport:
    """Non-Feller test for nearest-neighbour chains on the nonnegative integers.

    Requires ``sum 1/b(r, r+1) = inf`` and ``sum_r m({r, ...}) / b(r, r-1) < inf``.
    Pass either a :class:`BirthDeathChain` or ``b`` and ``m`` (numbers,
    expression strings or callables).
    """
    if chain is not None:
        if not isinstance(chain, BirthDeathChain):
            raise TypeError("not a birth-death chain")
        bf, mf = chain.b, chain.m
    else:
        if b is None or m is None:
            raise TypeError("give a chain or both b and m")
        bf, mf = _as_callable(b, "b"), _as_callable(m, "m")
    cond = SeriesReport.from_terms([1.0 / float(bf(r)) for r in range(Rmax)], index=range(1, Rmax + 1))
    tails = _tails(mf, Rmax, 4 * Rmax)
    if math.isinf(tails[0]):
        tail = SeriesReport([math.inf] * Rmax, [math.inf] * Rmax, math.nan, DIVERGES, note="infinite measure tails")
    else:
        tail = SeriesReport.from_terms([t / float(bf(r - 1)) for r, t in zip(range(1, Rmax + 1), tails)])
    if cond.verdict == DIVERGES and tail.verdict == CONVERGES:
        verdict = "non-Feller-suspected"
    elif tail.verdict == DIVERGES or cond.verdict == CONVERGES:
        verdict = "fails"
    else:
        verdict = INCONCLUSIVE
    return BirthDeathReport(cond, tail, verdict)


# --- uniform Feller probe ----------------------------------------------------------------


@dataclass
class FellerProbeRow:
    r: int
    y: Vertex
    max_p: float  # max over the time grid of p_t(x, y)
    p_T: float
    comparison_residual: float  # max_t p_t(x, y) - e^{T Deg(x)} p_T(x, y); <= 0 expected


@dataclass
class FellerProbe:
    x: Vertex
    T: float
    times: list[float]
    rows: list[FellerProbeRow] = field(default_factory=list)

    @property
    def decreasing(self) -> bool:
        vals = [row.max_p for row in self.rows]
        return all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))

    @property
    def max_comparison_residual(self) -> float:
        return max(row.comparison_residual for row in self.rows)


def geodesic_ray(g: GraphOracle, x: Vertex, length: int) -> list[Vertex]:
    """Deterministic ray ``x = y_0 ~ y_1 ~ ...`` with ``d(x, y_r) = r``."""
    dist = bfs_distances(g, x, length)
    ray = [x]
    for r in range(1, length + 1):
        options = [y for y, w in g.neighbors(ray[-1]) if w > 0 and dist.get(y) == r]
        if not options:
            break
        ray.append(max(options, key=repr))
    return ray


def uniform_feller_probe(
    g: GraphOracle,
    x: Vertex,
    T: float,
    n_times: int = 16,
    Rmax: int = 24,
    ray_length: int | None = None,
) -> FellerProbe:
    """Max over ``t in [0, T]`` of ``p_t(x, y)`` along a geodesic ray from ``x``.

    Also checks ``p_t(x, y) <= e^{T Deg(x)} p_T(x, y)`` on the time grid.
    Kernels are Dirichlet kernels on ``B_Rmax(x)``.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    times = list(np.linspace(0.0, T, n_times))
    length = ray_length if ray_length is not None else max(Rmax - 8, 1)
    ray = geodesic_ray(g, x, min(length, Rmax))
    d = exhaustion_domain(g, x, Rmax)
    cols = _kernel_column(d, x, times)  # symmetric kernel: column at x gives p_t(x, .)
    bound = math.exp(T * weighted_degree(g, x))
    probe = FellerProbe(x, T, times)
    for r, y in enumerate(ray):
        j = d.index[y]
        series = cols[:, j]
        probe.rows.append(
            FellerProbeRow(r, y, float(series.max()), float(series[-1]), float(np.max(series - bound * series[-1])))
        )
    return probe
