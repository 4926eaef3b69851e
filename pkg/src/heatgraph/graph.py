"""Weighted graphs, oracles for infinite families, and combinatorial helpers.

A graph is anything exposing ``root``, ``neighbors(x)`` and ``measure(x)``.
``neighbors`` returns a tuple of ``(y, b(x, y))`` pairs.  Finite graphs keep
their data in dictionaries; infinite families are deterministic functions of
the vertex label and are explored lazily through balls around a root.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

Vertex = Hashable
Neighbors = tuple[tuple[Vertex, float], ...]


class GraphError(Exception):
    pass


class UnknownVertexError(GraphError, KeyError):
    pass


class UnreachableError(GraphError):
    """Raised when a vertex is not found within the exploration budget."""


def _as_callable(value, name: str) -> Callable[[int], float]:
    # numbers, exprlang strings and callables are all accepted for b(r), m(r)
    if callable(value):
        return value
    if isinstance(value, str):
        from heatgraph.exprlang import compile_expr

        return compile_expr(value)
    if isinstance(value, (int, float)):
        c = float(value)
        return lambda r: c
    raise TypeError(f"{name} must be a number, an expression string or a callable")


class GraphOracle:
    """Locally finite graph given by a neighbor function and a measure.

    Both functions must be pure; results are memoized per instance.
    """

    finite = False

    def __init__(
        self,
        root: Vertex,
        neighbors: Callable[[Vertex], Iterable[tuple[Vertex, float]]],
        measure: Callable[[Vertex], float],
        name: str = "oracle",
    ):
        self.root = root
        self.name = name
        self._neighbors = lru_cache(maxsize=None)(lambda x: tuple(neighbors(x)))
        self._measure = lru_cache(maxsize=None)(measure)

    def neighbors(self, x: Vertex) -> Neighbors:
        return self._neighbors(x)

    def measure(self, x: Vertex) -> float:
        return self._measure(x)

    def weight(self, x: Vertex, y: Vertex) -> float:
        for z, w in self.neighbors(x):
            if z == y:
                return w
        return 0.0

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class FiniteGraph(GraphOracle):
    """Explicit graph with vertex measure ``m`` and edge weights ``b``.

    ``weights`` maps ordered pairs ``(x, y)`` to ``b(x, y)``.  Storing both
    orientations lets :func:`validate_graph` report asymmetric input; use
    :meth:`from_edges` to build a symmetric graph from unordered edges.
    """

    finite = True

    def __init__(
        self,
        measure: dict[Vertex, float],
        weights: dict[tuple[Vertex, Vertex], float],
        root: Vertex | None = None,
        name: str = "finite",
    ):
        self.vertices: list[Vertex] = list(measure)
        self._m = dict(measure)
        self.weights = dict(weights)
        adj: dict[Vertex, list[tuple[Vertex, float]]] = {v: [] for v in self.vertices}
        for (x, y), w in self.weights.items():
            if x not in adj:
                raise UnknownVertexError(x)
            if y not in self._m:
                raise UnknownVertexError(y)
            if w != 0:
                adj[x].append((y, float(w)))
        self._adj = {v: tuple(nbrs) for v, nbrs in adj.items()}
        super().__init__(
            self.vertices[0] if root is None else root,
            self._adj_lookup,
            self._m_lookup,
            name=name,
        )

    def _adj_lookup(self, x):
        try:
            return self._adj[x]
        except KeyError:
            raise UnknownVertexError(x) from None

    def _m_lookup(self, x):
        try:
            return self._m[x]
        except KeyError:
            raise UnknownVertexError(x) from None

    @classmethod
    def from_edges(
        cls,
        measure: dict[Vertex, float],
        edges: Iterable[tuple[Vertex, Vertex, float]],
        root: Vertex | None = None,
        name: str = "finite",
    ) -> "FiniteGraph":
        weights: dict[tuple[Vertex, Vertex], float] = {}
        for x, y, w in edges:
            weights[(x, y)] = float(w)
            weights[(y, x)] = float(w)
        return cls(measure, weights, root=root, name=name)

    def __len__(self) -> int:
        return len(self.vertices)

    def __contains__(self, x) -> bool:
        return x in self._m

    def weight(self, x: Vertex, y: Vertex) -> float:
        return self.weights.get((x, y), 0.0)


class BirthDeathChain(GraphOracle):
    """Nearest-neighbour chain on the nonnegative integers.

    ``b(r)`` is the weight of the edge ``{r, r + 1}`` and ``m(r)`` the measure
    of ``r``.  Either may be a number, an exprlang string or a callable.
    """

    def __init__(self, b, m, name: str = "birth_death"):
        self.b = _as_callable(b, "b")
        self.m = _as_callable(m, "m")

        def neighbors(r):
            if not isinstance(r, (int, np.integer)) or r < 0:
                raise UnknownVertexError(r)
            if r == 0:
                return ((1, float(self.b(0))),)
            return ((r - 1, float(self.b(r - 1))), (r + 1, float(self.b(r))))

        def measure(r):
            if not isinstance(r, (int, np.integer)) or r < 0:
                raise UnknownVertexError(r)
            return float(self.m(r))

        super().__init__(0, neighbors, measure, name=name)


def birth_death(b, m=1.0, name: str = "birth_death") -> BirthDeathChain:
    return BirthDeathChain(b, m, name=name)


def line(b=1.0, m=1.0, name: str = "line") -> GraphOracle:
    """The integers with weights and measure mirrored about 0.

    ``b(r)`` weighs the edges ``{r, r+1}`` and ``{-r-1, -r}``; ``m(r)`` is the
    measure of ``r`` and ``-r``.  Defaults give the standard lattice.
    """
    bf = _as_callable(b, "b")
    mf = _as_callable(m, "m")

    def edge(n):  # weight of {n, n+1}
        return float(bf(n if n >= 0 else -n - 1))

    def neighbors(n):
        if not isinstance(n, (int, np.integer)):
            raise UnknownVertexError(n)
        return ((n - 1, edge(n - 1)), (n + 1, edge(n)))

    return GraphOracle(0, neighbors, lambda n: float(mf(abs(n))), name=name)


def lattice(dims: int, name: str | None = None) -> GraphOracle:
    """Standard ``Z^dims`` with tuple vertices."""
    if dims < 1:
        raise ValueError("dims must be positive")
    steps = []
    for d in range(dims):
        for s in (-1, 1):
            e = [0] * dims
            e[d] = s
            steps.append(tuple(e))

    def neighbors(x):
        if not isinstance(x, tuple) or len(x) != dims:
            raise UnknownVertexError(x)
        return tuple((tuple(a + b for a, b in zip(x, e)), 1.0) for e in steps)

    return GraphOracle((0,) * dims, neighbors, lambda x: 1.0, name=name or f"Z^{dims}")


def regular_tree(degree: int, name: str | None = None) -> GraphOracle:
    """Standard ``degree``-regular tree; vertices are child-index paths."""
    if degree < 2:
        raise ValueError("degree must be at least 2")

    def neighbors(x):
        if not isinstance(x, tuple):
            raise UnknownVertexError(x)
        nbrs = []
        if x:
            nbrs.append((x[:-1], 1.0))
        nchildren = degree if not x else degree - 1
        nbrs.extend((x + (i,), 1.0) for i in range(nchildren))
        return tuple(nbrs)

    return GraphOracle((), neighbors, lambda x: 1.0, name=name or f"T_{degree}")


def cycle(n: int, b=None, m=None, name: str | None = None) -> FiniteGraph:
    """Cycle ``C_n``; ``b(j)`` weighs edge ``{j, j+1 mod n}``, ``m(j)`` vertex ``j``."""
    if n < 3:
        raise ValueError("cycle needs at least 3 vertices")
    bf = _as_callable(1.0 if b is None else b, "b")
    mf = _as_callable(1.0 if m is None else m, "m")
    measure = {j: float(mf(j)) for j in range(n)}
    edges = [(j, (j + 1) % n, float(bf(j))) for j in range(n)]
    return FiniteGraph.from_edges(measure, edges, root=0, name=name or f"C_{n}")


def complete_graph(n: int, b: float = 1.0, m: float = 1.0) -> FiniteGraph:
    measure = {j: float(m) for j in range(n)}
    edges = [(i, j, b) for i, j in itertools.combinations(range(n), 2)]
    return FiniteGraph.from_edges(measure, edges, root=0, name=f"K_{n}")


def random_connected_graph(
    n: int,
    rng: np.random.Generator | int | None = None,
    edge_prob: float = 0.3,
    b_range: tuple[float, float] = (0.0, 2.0),
    m_range: tuple[float, float] = (0.0, 2.0),
) -> FiniteGraph:
    """Random connected graph: a random spanning tree plus Bernoulli extra edges.

    Weights and measures are drawn from the half-open intervals
    ``(lo, hi]``.  ``rng`` is a generator or a seed.
    """
    rng = np.random.default_rng(rng)

    def draw(lo, hi):
        return hi - (hi - lo) * rng.random()

    order = rng.permutation(n)
    pairs = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        pairs.add(tuple(sorted((int(order[i]), int(order[j])))))
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < edge_prob:
            pairs.add((i, j))
    edges = [(i, j, draw(*b_range)) for i, j in sorted(pairs)]
    measure = {v: draw(*m_range) for v in range(n)}
    return FiniteGraph.from_edges(measure, edges, root=0, name=f"random_{n}")


# --- products ---------------------------------------------------------------

WEIGHTINGS = ("laplacian", "edge")


def product(*factors: GraphOracle, weighting: str = "laplacian", name: str | None = None):
    """Cartesian product of graphs with tuple vertices and ``m = prod m_i``.

    With ``weighting="laplacian"`` an edge moving factor ``i`` carries
    ``b_i * prod_{j != i} m_j``, so the product Laplacian is the sum of the
    factor Laplacians.  With ``weighting="edge"`` it carries ``b_i`` alone,
    keeping the factor edge weights as they are.

    The result is a :class:`FiniteGraph` when every factor is finite.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}")
    if len(factors) < 2:
        raise ValueError("product needs at least two factors")
    factors = tuple(factors)
    label = name or " x ".join(f.name for f in factors)

    def measure(x):
        if not isinstance(x, tuple) or len(x) != len(factors):
            raise UnknownVertexError(x)
        return math.prod(f.measure(xi) for f, xi in zip(factors, x))

    def neighbors(x):
        if not isinstance(x, tuple) or len(x) != len(factors):
            raise UnknownVertexError(x)
        ms = [f.measure(xi) for f, xi in zip(factors, x)]
        out = []
        for i, f in enumerate(factors):
            scale = 1.0
            if weighting == "laplacian":
                scale = math.prod(ms[:i] + ms[i + 1 :])
            for y, w in f.neighbors(x[i]):
                out.append((x[:i] + (y,) + x[i + 1 :], w * scale))
        return tuple(out)

    root = tuple(f.root for f in factors)
    if all(f.finite for f in factors):
        verts = list(itertools.product(*(f.vertices for f in factors)))
        meas = {v: measure(v) for v in verts}
        weights = {(v, y): w for v in verts for y, w in neighbors(v)}
        g = FiniteGraph(meas, weights, root=root, name=label)
    else:
        g = GraphOracle(root, neighbors, measure, name=label)
    g.factors = factors
    g.weighting = weighting
    return g


# --- degrees, spheres, distances ----------------------------------------------


def weighted_degree(g: GraphOracle, x: Vertex) -> float:
    """``Deg(x) = sum_y b(x, y) / m(x)``."""
    return sum(w for _, w in g.neighbors(x)) / g.measure(x)


def bfs_distances(g: GraphOracle, x0: Vertex, radius: int) -> dict[Vertex, int]:
    """Combinatorial distances from ``x0`` to every vertex of the closed ball."""
    dist = {x0: 0}
    queue = deque([x0])
    while queue:
        x = queue.popleft()
        d = dist[x]
        if d == radius:
            continue
        for y, w in g.neighbors(x):
            if w > 0 and y not in dist:
                dist[y] = d + 1
                queue.append(y)
    return dist


def graph_distance(g: GraphOracle, x: Vertex, y: Vertex, max_radius: int = 10_000) -> int:
    if x == y:
        g.measure(x)
        return 0
    dist = {x: 0}
    queue = deque([x])
    while queue:
        z = queue.popleft()
        d = dist[z]
        if d >= max_radius:
            break
        for u, w in g.neighbors(z):
            if w > 0 and u not in dist:
                if u == y:
                    return d + 1
                dist[u] = d + 1
                queue.append(u)
    raise UnreachableError(f"{y!r} unreachable within radius {max_radius} of {x!r}")


@dataclass(frozen=True)
class SphereProfile:
    """Degree extremes over the sphere ``S_r(x0)``.

    ``D`` is the maximal degree; ``Dminus``/``Dplus`` the maximal inner/outer
    degree and ``dminus``/``dplus`` the minimal ones.  An exhausted finite
    graph yields ``size == 0`` and NaN fields.
    """

    radius: int
    D: float
    Dminus: float
    Dplus: float
    dminus: float
    dplus: float
    size: int

    @property
    def empty(self) -> bool:
        return self.size == 0


def _profile_from(g, dist, r) -> SphereProfile:
    sphere = [x for x, d in dist.items() if d == r]
    if not sphere:
        nan = math.nan
        return SphereProfile(r, nan, nan, nan, nan, nan, 0)
    deg, dm, dp = [], [], []
    for x in sphere:
        mx = g.measure(x)
        inner = outer = total = 0.0
        for y, w in g.neighbors(x):
            total += w
            dy = dist.get(y)
            if dy == r - 1:
                inner += w
            elif dy == r + 1:
                outer += w
        deg.append(total / mx)
        dm.append(inner / mx)
        dp.append(outer / mx)
    prof = SphereProfile(r, max(deg), max(dm), max(dp), min(dm), min(dp), len(sphere))
    if r >= 1:
        assert prof.dminus > 0, "a sphere vertex without an inner neighbour"
    return prof


def sphere_profile(g: GraphOracle, x0: Vertex, r: int) -> SphereProfile:
    if r < 1:
        raise ValueError("r must be at least 1")
    return _profile_from(g, bfs_distances(g, x0, r + 1), r)


def sphere_profiles(g: GraphOracle, x0: Vertex, rmax: int) -> list[SphereProfile]:
    """Profiles for ``r = 1..rmax`` from a single breadth-first search."""
    dist = bfs_distances(g, x0, rmax + 1)
    return [_profile_from(g, dist, r) for r in range(1, rmax + 1)]


def apply_laplacian(g: GraphOracle, f, x: Vertex):
    """Formal Laplacian ``(1/m(x)) sum_y b(x, y) (f(x) - f(y))``.

    ``f`` is a mapping (or callable); values may be numpy arrays, in which
    case the Laplacian is applied to all of them at once.
    """
    get = f if callable(f) else f.__getitem__
    try:
        fx = get(x)
        total = 0.0
        for y, w in g.neighbors(x):
            total = total + w * (fx - get(y))
    except KeyError as exc:
        raise KeyError(f"function undefined at {exc.args[0]!r}, needed for the Laplacian at {x!r}") from None
    return total / g.measure(x)


def ball_truncation(g: GraphOracle, x0: Vertex, R: int):
    """Finite truncation on ``B_R(x0)`` with its interior/boundary split.

    A vertex is interior when all of its neighbours lie in the ball.
    """
    from heatgraph.domain import DirichletDomain

    if R < 0:
        raise ValueError("R must be nonnegative")
    dist = bfs_distances(g, x0, R)
    return DirichletDomain.from_graph(g, dist, x0, R)


# --- validation ---------------------------------------------------------------


@dataclass
class ValidationReport:
    checked: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str) -> None:
        self.violations.append(msg)


def validate_graph(g: GraphOracle, radius: int = 6) -> ValidationReport:
    """Check symmetry, positivity of ``m``, absence of self-loops and connectivity.

    Finite graphs are checked exhaustively; oracles on the ball of the given
    radius around the root.
    """
    report = ValidationReport()
    if g.finite:
        verts: Sequence[Vertex] = g.vertices
    else:
        verts = list(bfs_distances(g, g.root, radius))
    for x in verts:
        report.checked += 1
        try:
            mx = g.measure(x)
        except Exception as exc:  # noqa: BLE001 - report anything the oracle raises
            report.add(f"measure undefined at {x!r}: {exc}")
            continue
        if not (mx > 0 and math.isfinite(mx)):
            report.add(f"positivity: m({x!r}) = {mx!r} is not a positive finite number")
        seen = set()
        for y, w in g.neighbors(x):
            if y == x:
                report.add(f"self-loop: b({x!r}, {x!r}) = {w!r}")
                continue
            if y in seen:
                report.add(f"duplicate neighbour {y!r} listed by {x!r}")
            seen.add(y)
            if not (w >= 0 and math.isfinite(w)):
                report.add(f"weight: b({x!r}, {y!r}) = {w!r} is negative or not finite")
            try:
                back = g.weight(y, x)
            except KeyError:
                report.add(f"symmetry: {y!r} listed by {x!r} is not a vertex")
                continue
            if back != w:
                report.add(f"symmetry: b({x!r}, {y!r}) = {w!r} but b({y!r}, {x!r}) = {back!r}")
    if g.finite and g.vertices:
        reach = bfs_distances(g, g.vertices[0], len(g.vertices))
        missing = [v for v in g.vertices if v not in reach]
        if missing:
            report.add(f"connectivity: {len(missing)} vertices unreachable from {g.vertices[0]!r}")
    return report
