"""Regular coverings of weighted graphs and numerical checks of heat kernel
identities between a cover and its base.

A covering is described arithmetically: a projection, a canonical lift, a
fiber enumerator inside cover balls and a few deck-transformation
generators.  Nothing is tabulated, so infinite-sheeted covers are handled
the same way as finite ones.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from heatgraph.graph import (
    FiniteGraph,
    GraphOracle,
    Vertex,
    _as_callable,
    bfs_distances,
    cycle,
    graph_distance,
    line,
    product,
)
from heatgraph.heat import (
    MonotoneEstimate,
    CONVERGED,
    INCONCLUSIVE,
    _kernel_column,
    _mass_vector,
    capacity,
    default_radii,
    exhaustion_domain,
    heat_kernel,
    lambda0,
)

INF_SHEETS = math.inf


@dataclass
class CoveringMap:
    """Regular covering ``pi: cover -> base``.

    Attributes
    ----------
    project : callable
        ``pi`` on cover vertices.
    lift : callable
        A fixed preimage of each base vertex.
    fiber_points : callable
        ``(x, center, R) -> list`` of cover vertices over ``x`` within
        cover distance ``R`` of ``center`` (arithmetic, no search).
    distance : callable
        Combinatorial distance in the cover.
    sheets : int or inf
    deck : list of callables
        Generators of the deck group acting on cover vertices.
    """

    base: GraphOracle
    cover: GraphOracle
    project: Callable[[Vertex], Vertex]
    lift: Callable[[Vertex], Vertex]
    fiber_points: Callable[[Vertex, Vertex, int], list]
    distance: Callable[[Vertex, Vertex], int]
    sheets: float
    deck: list = field(default_factory=list)
    name: str = "cover"

    def fiber(self, x: Vertex, R: int, center: Vertex | None = None) -> list:
        """Cover vertices over ``x`` in the cover ball ``B_R(center)``."""
        center = self.lift(self.base.root) if center is None else center
        return self.fiber_points(x, center, R)

    @property
    def finite_sheets(self) -> bool:
        return not math.isinf(self.sheets)

    def with_cover(self, cover: GraphOracle) -> "CoveringMap":
        """Same projection data over a different cover graph (for tampering tests)."""
        return replace(self, cover=cover)


def _mod_fiber(k: int, dist: Callable[[int, int], int], period: int | None = None):
    def fiber_points(x, center, R):
        # candidates x + jk within R of center; for cycles only residues mod period
        base = center - ((center - x) % k)
        out = []
        lo = base - (R // k + 1) * k
        hi = base + (R // k + 2) * k
        for y in range(lo, hi + 1, k):
            yy = y % period if period else y
            if dist(center, yy) <= R:
                out.append(yy)
        return sorted(set(out))

    return fiber_points


def _periodic_line(k: int, b, m, name: str) -> GraphOracle:
    bf = _as_callable(1.0 if b is None else b, "b")
    mf = _as_callable(1.0 if m is None else m, "m")

    def neighbors(n):
        return ((n - 1, float(bf((n - 1) % k))), (n + 1, float(bf(n % k))))

    return GraphOracle(0, neighbors, lambda n: float(mf(n % k)), name=name)


def line_over_cycle(k: int, b=None, m=None) -> CoveringMap:
    """Universal cover ``Z -> C_k``, ``pi(n) = n mod k``; infinitely many sheets.

    ``b(j)`` weighs the base edge ``{j, j+1 mod k}`` and ``m(j)`` the base
    vertex ``j``; the cover repeats them periodically.
    """
    if k < 3:
        raise ValueError("k must be at least 3")
    base = cycle(k, b, m)
    cover = _periodic_line(k, b, m, f"Z over C_{k}")
    dist = lambda a, c: abs(a - c)
    return CoveringMap(
        base, cover, lambda n: n % k, lambda x: x, _mod_fiber(k, dist), dist,
        INF_SHEETS, [lambda n: n + k, lambda n: n - k], f"Z -> C_{k}",
    )


def cyclic_cover(n: int, k: int, b=None, m=None) -> CoveringMap:
    """``C_n -> C_k`` with ``pi(j) = j mod k`` and ``n / k`` sheets."""
    if k < 3:
        raise ValueError("k must be at least 3")
    if n % k:
        raise ValueError(f"{k} does not divide {n}")
    bf = _as_callable(1.0 if b is None else b, "b")
    mf = _as_callable(1.0 if m is None else m, "m")
    base = cycle(k, bf, mf)
    cover = cycle(n, lambda j: bf(j % k), lambda j: mf(j % k), name=f"C_{n}")

    def dist(a, c):
        d = abs(a - c) % n
        return min(d, n - d)

    return CoveringMap(
        base, cover, lambda j: j % k, lambda x: x, _mod_fiber(k, dist, period=n), dist,
        n // k, [lambda j: (j + k) % n], f"C_{n} -> C_{k}",
    )


def identity_cover(g: GraphOracle) -> CoveringMap:
    """Trivial one-sheeted cover ``g -> g``."""
    dist = lambda a, c: graph_distance(g, a, c)
    return CoveringMap(
        g, g, lambda v: v, lambda v: v,
        lambda x, center, R: [x] if dist(center, x) <= R else [],
        dist, 1, [], f"id({g.name})",
    )


def product_cover(*factors, weighting: str = "laplacian") -> CoveringMap:
    """Componentwise covering of Cartesian products.

    Each factor is a :class:`CoveringMap` or a plain graph (taken with the
    identity cover).  Sheets multiply; deck generators act factorwise.
    """
    if len(factors) < 2:
        raise ValueError("product_cover needs at least two factors")
    covs = [f if isinstance(f, CoveringMap) else identity_cover(f) for f in factors]
    base = product(*(c.base for c in covs), weighting=weighting)
    cover = product(*(c.cover for c in covs), weighting=weighting)
    arity = len(covs)

    def check(v):
        if not isinstance(v, tuple) or len(v) != arity:
            raise ValueError(f"expected a {arity}-tuple, got {v!r}")
        return v

    def project(v):
        return tuple(c.project(a) for c, a in zip(covs, check(v)))

    def lift(x):
        return tuple(c.lift(a) for c, a in zip(covs, check(x)))

    def distance(a, b):
        return sum(c.distance(p, q) for c, p, q in zip(covs, check(a), check(b)))

    def fiber_points(x, center, R):
        check(x)
        check(center)
        parts = [c.fiber_points(a, ctr, R) for c, a, ctr in zip(covs, x, center)]
        dists = [[c.distance(ctr, p) for p in ps] for c, ctr, ps in zip(covs, center, parts)]
        out = []
        for idx in itertools.product(*(range(len(ps)) for ps in parts)):
            if sum(d[i] for d, i in zip(dists, idx)) <= R:
                out.append(tuple(ps[i] for ps, i in zip(parts, idx)))
        return out

    deck = []
    for i, c in enumerate(covs):
        for gen in c.deck:
            deck.append(lambda v, i=i, gen=gen: v[:i] + (gen(v[i]),) + v[i + 1 :])
    sheets = math.prod(c.sheets for c in covs)
    return CoveringMap(
        base, cover, project, lift, fiber_points, distance, sheets, deck,
        " x ".join(c.name for c in covs),
    )


# --- validation ---------------------------------------------------------------------


@dataclass
class CoverReport:
    checked: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _close(a: float, b: float, rtol: float = 1e-12) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def validate_covering(c: CoveringMap, R: int = 4, max_violations: int = 50) -> CoverReport:
    """Local-isomorphism, measure, surjectivity and deck checks on ``B_R``."""
    if R < 1:
        raise ValueError("R must be at least 1")
    rep = CoverReport()

    def bad(msg):
        if len(rep.violations) < max_violations:
            rep.violations.append(msg)

    center = c.lift(c.base.root)
    ball = bfs_distances(c.cover, center, R)
    for v in ball:
        rep.checked += 1
        x = c.project(v)
        if not _close(c.cover.measure(v), c.base.measure(x)):
            bad(f"measure: m~({v!r}) = {c.cover.measure(v)!r} but m({x!r}) = {c.base.measure(x)!r}")
        up = sorted(((repr(c.project(y)), w) for y, w in c.cover.neighbors(v)), key=lambda p: p[0])
        down = sorted(((repr(y), w) for y, w in c.base.neighbors(x)), key=lambda p: p[0])
        if [p for p, _ in up] != [p for p, _ in down]:
            bad(f"neighbourhood: {v!r} projects onto {[p for p, _ in up]}, base {x!r} has {[p for p, _ in down]}")
        else:
            for (name, w1), (_, w2) in zip(up, down):
                if not _close(w1, w2):
                    bad(f"weight: b~({v!r}, lift of {name}) = {w1!r} but b({x!r}, {name}) = {w2!r}")
        for gen in c.deck:
            gv = gen(v)
            if c.project(gv) != x:
                bad(f"deck: generator moves {v!r} out of its fiber to {gv!r}")
    image = {c.project(v) for v in ball}
    for x in bfs_distances(c.base, c.base.root, R):
        if x not in image:
            bad(f"surjectivity: base vertex {x!r} has no preimage within R={R}")
    # transitivity of the deck group on fibers inside the ball
    for x in list(bfs_distances(c.base, c.base.root, min(R, 2))):
        target = set(c.fiber(x, R, center))
        seen = {c.lift(x)}
        frontier = [c.lift(x)]
        for _ in range(4 * R + 4):
            nxt = []
            for v in frontier:
                for gen in c.deck:
                    gv = gen(v)
                    if gv not in seen and c.distance(center, gv) <= 2 * R + 2:
                        seen.add(gv)
                        nxt.append(gv)
            frontier = nxt
        missing = target - seen
        if missing:
            bad(f"transitivity: fiber over {x!r} not reached by deck generators: {sorted(map(repr, missing))[:5]}")
    return rep


# --- heat kernel identities ------------------------------------------------------------------


@dataclass
class FiberSumReport:
    """Fiber sums ``S_R`` of cover Dirichlet kernels against the base kernel."""

    estimate: MonotoneEstimate  # S_R over the radii
    base_value: float
    base_estimate: MonotoneEstimate
    basepoint: Vertex

    @property
    def residual(self) -> float:
        """``p_t(x, y) - S_R`` at the largest radius (a signed gap, >= -tol expected)."""
        return self.base_value - self.estimate.value


# uniformization is used for fiber sums while q t stays below this
UNIFORM_LIMIT = 2000.0


def fiber_sums(
    c: CoveringMap, x: Vertex, y: Vertex, t: float, radii: Sequence[int], basepoint: Vertex | None = None
) -> tuple[list[int], list[float]]:
    """``S_R = sum_{y~ in fiber(y), |y~ - x~| <= R} p~^R_t(x~, y~)`` for each ``R``.

    Kernels come from uniformization with one rate ``q`` for all radii when
    ``q t`` is moderate, which keeps ``S_R`` nondecreasing in ``R`` exactly in
    floating point; otherwise from the default heat-engine path.
    """
    xt = c.lift(x) if basepoint is None else basepoint
    if c.project(xt) != x:
        raise ValueError(f"{xt!r} does not lie over {x!r}")
    radii = list(radii)
    big = exhaustion_domain(c.cover, xt, max(radii))
    k = big.n_interior
    q = float(big.degree[:k].max()) if k else 0.0
    uniform = 0 < q * t <= UNIFORM_LIMIT and not big.graded
    used, vals = [], []
    for R in radii:
        d = exhaustion_domain(c.cover, xt, R)
        j = d.interior_index(xt)
        if uniform and j is not None:
            e = np.zeros(d.n_interior)
            e[j] = 1.0 / d.measure[j]
            col = np.zeros(len(d))
            col[: d.n_interior] = d.semigroup_uniformized(t, e, q)
        else:
            col = _kernel_column(d, xt, [t])[0]
        pts = [p for p in c.fiber(y, R, xt) if p in d.index]
        vals.append(float(math.fsum(col[d.index[p]] for p in pts)))
        used.append(R)
        if d.is_closed:
            break
    return used, vals


def fiber_sum_residual(
    c: CoveringMap,
    x: Vertex,
    y: Vertex,
    t: float,
    R: int = 20,
    radii: Sequence[int] | None = None,
    basepoint: Vertex | None = None,
    tol: float = 1e-8,
) -> FiberSumReport:
    """Compare the fiber sum of cover kernels with the base kernel ``p_t(x, y)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    radii = list(radii) if radii is not None else sorted(set(default_radii(R) + [R]))
    used, vals = fiber_sums(c, x, y, t, radii, basepoint)
    inc = [b - a for a, b in zip(vals, vals[1:])]
    verdict = CONVERGED if len(inc) >= 2 and abs(inc[-1]) < tol and abs(inc[-2]) < tol else INCONCLUSIVE
    xt = c.lift(x) if basepoint is None else basepoint
    if exhaustion_domain(c.cover, xt, used[-1]).is_closed:
        verdict = CONVERGED
    est = MonotoneEstimate(used, vals, "increasing", verdict)
    base = heat_kernel(c.base, x, y, t, tol=tol, Rmax=max(R, 4))
    return FiberSumReport(est, base.value, base.estimate, xt)


def diag_sheet_check(c: CoveringMap, x: Vertex, t: float, Rmax: int = 24) -> float:
    """``n p~_t(x~, x~) - p_t(x, x)`` for an ``n``-sheeted cover (``>= 0`` expected)."""
    if not c.finite_sheets:
        raise ValueError("sheet inequality needs finitely many sheets")
    xt = c.lift(x)
    cover_p = heat_kernel(c.cover, xt, xt, t, Rmax=Rmax).value
    base_p = heat_kernel(c.base, x, x, t, Rmax=Rmax).value
    return c.sheets * cover_p - base_p


@dataclass
class Lambda0Comparison:
    base: MonotoneEstimate
    cover: MonotoneEstimate

    @property
    def gap(self) -> float:
        """Cover estimate minus base estimate at the last matched radius."""
        return self.cover.value - self.base.value

    def holds(self, tol: float = 1e-8, finite_sheets: bool = False) -> bool:
        pairs = zip(self.base.values, self.cover.values)
        ok = all(cv >= bv - tol for bv, cv in pairs)
        if finite_sheets:
            ok = ok and abs(self.gap) < tol
        return ok


def lambda0_compare(c: CoveringMap, R: int = 8, radii: Sequence[int] | None = None) -> Lambda0Comparison:
    """Bottom of the spectrum of base and cover on matched Dirichlet balls."""
    if R < 2:
        raise ValueError("R must be at least 2")
    radii = list(radii) if radii is not None else sorted(set(default_radii(R) + [R]))
    xb = c.base.root
    base = lambda0(c.base, xb, radii=radii)
    cover = lambda0(c.cover, c.lift(xb), radii=radii)
    # a finite graph stops early; pad with its exact value so radii stay matched
    n = max(len(base.values), len(cover.values))
    for est in (base, cover):
        while len(est.values) < n:
            est.values.append(est.values[-1])
            est.radii.append(radii[len(est.radii)])
    return Lambda0Comparison(base, cover)


@dataclass
class MassComparison:
    radii: list[int]
    base_deficit: list[float]
    cover_deficit: list[float]

    @property
    def difference(self) -> float:
        return abs(self.base_deficit[-1] - self.cover_deficit[-1])


def mass_deficit_compare(
    c: CoveringMap, x: Vertex, t: float, R: int = 20, radii: Sequence[int] | None = None
) -> MassComparison:
    """``1 - sum_y p^R_t(x, y) m(y)`` on base and cover over matched balls."""
    if t <= 0:
        raise ValueError("t must be positive")
    radii = list(radii) if radii is not None else sorted(set(default_radii(R) + [R]))
    xt = c.lift(x)
    bd, cd = [], []
    for Rr in radii:
        db = exhaustion_domain(c.base, x, Rr)
        dc = exhaustion_domain(c.cover, xt, Rr)
        bd.append(1.0 - float(_mass_vector(db, t)[db.index[x]]))
        cd.append(1.0 - float(_mass_vector(dc, t)[dc.index[xt]]))
    return MassComparison(radii, bd, cd)


# --- the infinite-sheeted converse example -------------------------------------------------


def measure_line(m="4^-r") -> GraphOracle:
    """Integers with unit edge weights and symmetric measure ``m(|z|)``."""
    return line(1.0, m, name="Z_{1,m}")


def converse_example(m="4^-r") -> CoveringMap:
    """``Z_{1,m} x Z x Z -> Z_{1,m} x C_3 x C_3`` with plain edge weights.

    Every edge carries weight 1 and the measure is ``m(z)``, so the cover has
    the edge weights of the standard cubic lattice whatever ``m`` is.
    """
    zm = measure_line(m)
    return product_cover(zm, line_over_cycle(3), line_over_cycle(3), weighting="edge")


def radial_certificate(m: Callable[[int], float], lam: float = -1.0, Z: int = 200, iters: int = 200) -> np.ndarray:
    """Radial ``v`` on ``Z_{1,m}`` with ``L v = lam v`` away from the origin.

    Fixed point of ``v(z) = 1 - sum_{j=1}^{z} sum_{k>=j} (-lam) m(k) v(k)``
    computed on ``0..Z`` (the measure tail beyond ``Z`` is dropped, which is
    negligible for summable tails).
    """
    mv = np.array([float(m(k)) for k in range(Z + 1)])
    v = np.ones(Z + 1)
    for _ in range(iters):
        w = -lam * mv * v
        tails = np.cumsum(w[::-1])[::-1]  # tails[j] = sum_{k>=j} w_k
        new = np.ones(Z + 1)
        new[1:] = 1.0 - np.cumsum(tails[1:])
        if np.max(np.abs(new - v)) < 1e-15:
            v = new
            break
        v = new
    return v


@dataclass
class ConverseReport:
    tail_sum: float  # sum_r sum_{k>r} m(k)
    factor_verdict: str  # birth-death non-Feller test on the half line
    certificate_inf: float  # v at the end of the window (stays away from 0)
    certificate_residual: float  # min over the lifted base ball of (L v - lam v) / max(1, Deg)
    cover_capacity: MonotoneEstimate
    cover_capacity_verdict: str
    cover_ray: list[float]  # p_t(x~, (0, r, 0)) on the cover
    base_ray: list[float]  # p_t(x, (r, 0, 0)) on the base
    t: float
    verdicts: dict = field(default_factory=dict)


def converse_counterexample_report(
    m="4^-r",
    t: float = 1.0,
    ray: int = 15,
    base_R: int = 48,
    cover_R: int = 10,
    cap_radii: Sequence[int] = (4, 6, 8, 10, 12),
    lam: float = -1.0,
) -> ConverseReport:
    """Evidence that the cover is uniformly transient and Feller while the base is not Feller."""
    from heatgraph.feller import birth_death_nonfeller

    mf = _as_callable(m, "m")
    c = converse_example(m)
    # (a) base: summable measure tails and a non-vanishing radial certificate
    tails = np.array([float(mf(k)) for k in range(400)])
    tail_sum = float(sum(np.cumsum(tails[::-1])[::-1][1:]))
    factor = birth_death_nonfeller(b=1.0, m=mf, Rmax=60)
    v = radial_certificate(mf, lam)
    base = c.base
    worst = math.inf
    for xb, r in bfs_distances(base, base.root, 12).items():
        if r > 11:
            continue
        z = abs(xb[0])
        vx = v[z]
        nb = base.neighbors(xb)
        lv = sum(w * (vx - v[abs(y[0])]) for y, w in nb) / base.measure(xb)
        # relative to the degree: L v divides differences by the tiny measure
        deg = sum(w for _, w in nb) / base.measure(xb)
        worst = min(worst, (lv - lam * vx) / max(1.0, deg))
    db = exhaustion_domain(base, base.root, base_R)
    col = _kernel_column(db, base.root, [t])[0]
    base_ray = [float(col[db.index[(r, 0, 0)]]) for r in range(ray + 1)]
    # (b) cover: capacity of the lattice-like cover
    xt = c.lift(base.root)
    cap = capacity(c.cover, xt, radii=list(cap_radii))
    # (c) cover: heat kernel along a lattice ray
    dc = exhaustion_domain(c.cover, xt, cover_R)
    colc = _kernel_column(dc, xt, [t])[0]
    cover_ray = [float(colc[dc.index[(0, r, 0)]]) for r in range(min(ray, cover_R) + 1)]
    rep = ConverseReport(
        tail_sum, factor.verdict, float(v[-1]), worst, cap.estimate, cap.verdict, cover_ray, base_ray, t
    )
    rep.verdicts = {
        "base tails summable": bool(np.isfinite(tail_sum)),
        "base factor non-Feller-suspected": factor.verdict == "non-Feller-suspected",
        "certificate supersolution": worst >= -1e-12,
        "certificate does not vanish": v[-1] > 0.5,
        "base ray stays above 0.2 p_t(x,x)": min(base_ray) >= 0.2 * base_ray[0],
        "cover capacity positive": cap.estimate.value > 0.05,
        "cover ray decays": all(b <= a for a, b in zip(cover_ray, cover_ray[1:])) and cover_ray[-1] < 1e-3 * cover_ray[0],
    }
    rep.verdicts = {k: bool(v) for k, v in rep.verdicts.items()}
    return rep
