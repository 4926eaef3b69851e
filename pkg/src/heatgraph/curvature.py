"""Curvature on weighted graphs: Ollivier-Ricci on chains and Bakry-Emery bounds.

The Gamma operators follow the recursion

    Gamma_0(f, g) = f g,
    Gamma_k(f, g) = -L Gamma_{k-1}(f, g) + Gamma_{k-1}(L f, g) + Gamma_{k-1}(f, L g),

with the formal Laplacian ``L`` and *no* factors of 1/2, so ``Gamma_1`` is
twice the usual carre du champ and ``Gamma_2`` four times the usual one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from heatgraph.graph import (
    BirthDeathChain,
    GraphOracle,
    Vertex,
    _as_callable,
    apply_laplacian,
    bfs_distances,
)

NEG_INF = -math.inf


# --- Ollivier-Ricci on birth-death chains -------------------------------------------


def ollivier_bd(b: Callable[[int], float], m: Callable[[int], float], r: int):
    """Curvature between ``r - 1`` and ``r`` on a birth-death chain.

    ``kappa(r) = [b(r-1,r) - b(r-1,r-2)] / m(r-1) - [b(r,r+1) - b(r,r-1)] / m(r)``
    with ``b(0, -1) = 0``.  ``b(r)`` is the weight of ``{r, r+1}``.  Works with
    any number type supporting field arithmetic (floats, Fractions, ...).
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    below = b(r - 2) if r >= 2 else 0
    return (b(r - 1) - below) / m(r - 1) - (b(r) - b(r - 1)) / m(r)


# --- Gamma calculus --------------------------------------------------------------------


def _lap(g: GraphOracle, F: Callable) -> Callable:
    cache: dict = {}

    def LF(y):
        if y not in cache:
            cache[y] = apply_laplacian(g, F, y)
        return cache[y]

    return LF


def _gamma_fn(g: GraphOracle, k: int, f: Callable, h: Callable) -> Callable:
    """``Gamma_k(f, h)`` as a lazily evaluated vertex function."""
    if k == 0:
        return lambda y: f(y) * h(y)
    prev = _gamma_fn(g, k - 1, f, h)
    left = _gamma_fn(g, k - 1, _lap(g, f), h)
    right = _gamma_fn(g, k - 1, f, _lap(g, h))
    lap_prev = _lap(g, prev)
    return lambda y: -lap_prev(y) + left(y) + right(y)


def _getter(f):
    if callable(f):
        return f
    return f.__getitem__


def gamma(g: GraphOracle, k: int, f, x: Vertex, h=None):
    """Literal ``Gamma_k(f, h)(x)`` for ``k`` in {1, 2}; ``h`` defaults to ``f``.

    ``f`` must be defined on ``B_k(x)`` (a mapping or a callable); values may
    be numpy arrays to evaluate many functions at once.
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    fget = _getter(f)
    hget = fget if h is None else _getter(h)
    try:
        return _gamma_fn(g, k, fget, hget)(x)
    except KeyError as exc:
        raise KeyError(f"insufficient support for Gamma_{k} at {x!r}: {exc.args[0]}") from None


# --- Bakry-Emery curvature bound -----------------------------------------------------------


@dataclass
class BEForms:
    """Quadratic forms of ``Gamma_1`` and ``Gamma_2`` at ``x`` on ``B_2(x)``."""

    x: Vertex
    vertices: list  # B_2(x), x first, then the sphere S_1, then S_2
    n1: int  # size of S_1
    gamma1: np.ndarray
    gamma2: np.ndarray


def be_forms(g: GraphOracle, x: Vertex) -> BEForms:
    dist = bfs_distances(g, x, 2)
    verts = [v for v in dist if dist[v] == 0] + [v for v in dist if dist[v] == 1] + [v for v in dist if dist[v] == 2]
    n = len(verts)
    eye = np.eye(n)
    rows = {v: eye[i][:, None] for i, v in enumerate(verts)}
    cols = {v: eye[i][None, :] for i, v in enumerate(verts)}
    # outer-product trick: Gamma_k(f, h) of basis vectors gives the full matrix
    g1 = gamma(g, 1, rows, x, cols)
    g2 = gamma(g, 2, rows, x, cols)
    n1 = sum(1 for v in verts if dist[v] == 1)
    return BEForms(x, verts, n1, 0.5 * (g1 + g1.T), 0.5 * (g2 + g2.T))


@dataclass
class BEResult:
    K: float
    null_min: float  # smallest eigenvalue of Gamma_2 on the Gamma_1 null space (f(x) = 0 slice)
    flagged: bool  # True when K = -inf


def bakry_emery_bound(g: GraphOracle, x: Vertex, null_tol: float = 1e-12) -> float:
    """Largest ``K`` with ``Gamma_2(f,f)(x) >= K Gamma_1(f,f)(x)`` for all ``f``."""
    return bakry_emery(g, x, null_tol).K


def bakry_emery(g: GraphOracle, x: Vertex, null_tol: float = 1e-12) -> BEResult:
    """Bakry-Emery bound with diagnostics.

    Both forms are invariant under adding constants, so ``f(x) = 0`` is
    imposed.  ``f`` then splits into ``u`` on the neighbours and ``w`` on the
    second sphere; ``Gamma_1`` only sees ``u``.  Minimizing ``Gamma_2`` over
    ``w`` (a Schur complement) leaves a generalized eigenproblem in ``u``.
    If ``Gamma_2`` is negative on the null space of ``Gamma_1`` the bound is
    ``-inf``.
    """
    F = be_forms(g, x)
    n1 = F.n1
    A = F.gamma1[1 : 1 + n1, 1 : 1 + n1]
    B = F.gamma2[1:, 1:]
    Buu, Buw, Bww = B[:n1, :n1], B[:n1, n1:], B[n1:, n1:]
    if Bww.size:
        evals, evecs = np.linalg.eigh(Bww)
        scale = max(1.0, float(np.max(np.abs(B))))
        null_min = float(evals[0])
        if null_min < -null_tol * scale:
            return BEResult(NEG_INF, null_min, True)
        # pseudo-inverse on the range; coupling into the kernel gives -inf
        keep = evals > null_tol * scale
        coupling = Buw @ evecs[:, ~keep]
        if coupling.size and np.max(np.abs(coupling)) > 1e-9 * scale:
            return BEResult(NEG_INF, null_min, True)
        V = evecs[:, keep]
        S = Buu - (Buw @ V) @ np.diag(1.0 / evals[keep]) @ (Buw @ V).T
    else:
        null_min = math.inf
        S = Buu
    S = 0.5 * (S + S.T)
    K = float(sla.eigh(S, A, eigvals_only=True)[0])
    return BEResult(K, null_min, False)


def be_bruteforce(
    g: GraphOracle,
    x: Vertex,
    n_samples: int = 10_000,
    rng: np.random.Generator | int | None = 0,
    refine: bool = True,
) -> float:
    """Minimum of ``Gamma_2(f,f)(x) / Gamma_1(f,f)(x)`` over random ``f``.

    ``f`` is drawn on ``B_2(x)`` with ``f(x) = 0`` and the ratio is evaluated
    through the literal recursion (vectorized over samples).  With
    ``refine`` the best samples seed a local optimizer.
    """
    rng = np.random.default_rng(rng)
    dist = bfs_distances(g, x, 2)
    verts = list(dist)
    others = [v for v in verts if v != x]

    def ratios(samples: np.ndarray) -> np.ndarray:
        f = {x: np.zeros(samples.shape[0])}
        for i, v in enumerate(others):
            f[v] = samples[:, i]
        g1 = gamma(g, 1, f, x)
        g2 = gamma(g, 2, f, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(g1 > 0, g2 / g1, np.inf)

    samples = rng.standard_normal((n_samples, len(others)))
    r = ratios(samples)
    best = float(np.min(r))
    if refine:
        for idx in np.argsort(r)[:5]:
            res = minimize(lambda s: float(ratios(s[None, :])[0]), samples[idx], method="BFGS",
                           options={"gtol": 1e-12, "maxiter": 2000})
            if np.isfinite(res.fun):
                best = min(best, float(res.fun))
    return best


# --- W conditions and constructions -------------------------------------------------


def _seq(f) -> Callable[[int], float]:
    if isinstance(f, (list, tuple, np.ndarray)):
        return lambda r: f[r]
    return _as_callable(f, "sequence")


@dataclass(frozen=True)
class WCheck:
    W_minus: float
    W_plus: float
    ok: bool


def path_W(dminus, dplus, k_r: float, r: int) -> WCheck:
    """Closed-form test of ``K_BE(r) >= k_r`` on a birth-death chain.

    ``dminus`` and ``dplus`` give ``d_-(s)`` and ``d_+(s)`` (callables or
    sequences indexed by ``s``); ``d_-(0)`` is taken to be 0.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    dm, dp = _seq(dminus), _seq(dplus)

    def dmv(s):
        return 0.0 if s == 0 else float(dm(s))

    Wm = -dmv(r - 1) + 3 * float(dp(r - 1)) + dmv(r) - float(dp(r)) - 2 * k_r
    Wp = -float(dp(r + 1)) + 3 * dmv(r + 1) + float(dp(r)) - dmv(r) - 2 * k_r
    ok = Wm >= 0 and Wp >= 0 and Wm * Wp >= 4 * dmv(r) * float(dp(r))
    return WCheck(Wm, Wp, ok)


@dataclass
class CurvatureProfile:
    r: int
    kappa: float  # Ollivier-Ricci between r-1 and r
    K_BE: float  # Bakry-Emery bound at r
    target: float  # k_r
    W_minus: float = math.nan
    W_plus: float = math.nan
    W_ok: bool | None = None


def chain_degrees(chain: BirthDeathChain, r: int) -> tuple[float, float]:
    """``(d_-(r), d_+(r))`` of a birth-death chain."""
    m = float(chain.m(r))
    dm = float(chain.b(r - 1)) / m if r >= 1 else 0.0
    return dm, float(chain.b(r)) / m


def curvature_table(chain: BirthDeathChain, k: Callable[[int], float], N: int) -> list[CurvatureProfile]:
    """Ollivier, Bakry-Emery and W data at ``r = 1..N``."""
    rows = []
    dm = lambda s: chain_degrees(chain, s)[0]
    dp = lambda s: chain_degrees(chain, s)[1]
    for r in range(1, N + 1):
        kr = float(k(r))
        w = path_W(dm, dp, kr, r)
        rows.append(
            CurvatureProfile(r, float(ollivier_bd(chain.b, chain.m, r)), bakry_emery_bound(chain, r), kr,
                             w.W_minus, w.W_plus, w.ok)
        )
    return rows


@dataclass
class ConstructionReport:
    graph: BirthDeathChain
    profiles: list[CurvatureProfile]
    checks: dict[str, bool] = field(default_factory=dict)
    series: object = None  # SeriesReport backing the non-Feller claim
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def counterexample_dminus(k: Callable[[int], float], N: int) -> list[float]:
    """``d_-(0..N)`` with increments ``max(2 max(k_r, k_{r-1}), 3r^2 - 3r + 1)``."""
    d = [0.0]
    for r in range(1, N + 1):
        d.append(d[-1] + max(2 * max(float(k(r)), float(k(r - 1))), 3 * r * r - 3 * r + 1))
    return d


def build_feller_counterexample(k, N: int, tol: float = 1e-8) -> ConstructionReport:
    """Chain with ``d_+ = 1`` and fast growing ``d_-`` whose curvature exceeds ``k_r``.

    ``m(0) = 1``, ``m(r) = m(r-1) / d_-(r)`` and ``b(r, r+1) = m(r)``.  The
    report verifies ``kappa(r) >= k_r``, ``K_BE(r) >= k_r`` (through both the
    W conditions and the eigenproblem) for ``r <= N`` and classifies the
    non-Feller series.
    """
    from heatgraph.feller import series_nonfeller

    if N < 3:
        raise ValueError("N must be at least 3")
    kf = _seq(k)
    # two extra radii so the balls B_2(r) for r <= N and the series window are covered
    horizon = max(N + 2, 40)
    dm = counterexample_dminus(kf, horizon)
    m = [1.0]
    for r in range(1, horizon + 1):
        m.append(m[-1] / dm[r])

    def m_of(r):
        if r <= horizon:
            return m[r]
        raise ValueError(f"chain only built up to r={horizon}")

    chain = BirthDeathChain(m_of, m_of, name="feller_counterexample")
    profiles = curvature_table(chain, kf, N)
    series = series_nonfeller(chain, Rmax=horizon - 1)
    checks = {
        "kappa >= k": all(p.kappa >= p.target - tol for p in profiles),
        "W conditions": all(p.W_ok for p in profiles),
        "K_BE >= k": all(p.K_BE >= p.target - tol for p in profiles),
        "sum 1/d_- converges": series.verdict == "converges-suspected",
    }
    return ConstructionReport(chain, profiles, checks, series, {"dminus": dm})


class _ExactKappaTables:
    """Lazily extended exact tables of ``m(r)`` and ``b(r, r+1)``."""

    def __init__(self, k: Callable[[int], float]):
        self.k = k
        self.m = [Fraction(1)]
        self.b = [Fraction(2)]
        self.C = [Fraction(2)]  # C_0 = Deg(0)

    def extend(self, r: int) -> None:
        while len(self.m) <= r:
            s = len(self.m)
            C = self.C[-1] - Fraction(float(self.k(s)))
            ms = Fraction(1, 2**s) / (1 + abs(C))
            self.C.append(C)
            self.m.append(ms)
            self.b.append(self.b[-1] + C * ms)

    def m_exact(self, r: int) -> Fraction:
        self.extend(r)
        return self.m[r]

    def b_exact(self, r: int) -> Fraction:
        self.extend(r)
        return self.b[r]


def build_exact_kappa(k, N: int) -> ConstructionReport:
    """Chain whose Ollivier curvature equals a prescribed sequence ``k_r``.

    ``m(0) = 1``, ``b(0,1) = 2``, ``C_r = 2 - sum_{j<=r} k_j``,
    ``m(r) = 2^-r / (1 + |C_r|)`` and ``b(r,r+1) = b(r-1,r) + C_r m(r)``.  The
    recursion runs in exact rational arithmetic (each ``k_r`` is taken as the
    exact value of its double), so the curvature identity is not spoiled by
    cancellation.
    """
    from heatgraph.feller import birth_death_nonfeller

    if N < 2:
        raise ValueError("N must be at least 2")
    kf = _seq(k)
    T = _ExactKappaTables(kf)
    chain = BirthDeathChain(lambda r: float(T.b_exact(r)), lambda r: float(T.m_exact(r)), name="exact_kappa")
    profiles = []
    kappa_err = 0.0
    bmin, bmax, jump_ok = math.inf, -math.inf, True
    for r in range(1, N + 1):
        kap = ollivier_bd(T.b_exact, T.m_exact, r)
        kr = float(kf(r))
        kappa_err = max(kappa_err, abs(float(kap) - kr))
        step = abs(T.b_exact(r) - T.b_exact(r - 1))
        jump_ok &= step <= Fraction(1, 2**r)
        profiles.append(CurvatureProfile(r, float(kap), bakry_emery_bound(chain, r), kr))
    for r in range(0, N + 1):
        bmin = min(bmin, float(T.b_exact(r)))
        bmax = max(bmax, float(T.b_exact(r)))
    nf = birth_death_nonfeller(chain, Rmax=max(N, 30))
    checks = {
        "kappa == k": kappa_err <= 1e-12,
        "b in [1,3]": 1 <= bmin and bmax <= 3,
        "|b(r,r+1) - b(r-1,r)| <= 2^-r": jump_ok,
        "sum m-tails finite": nf.tail_series.verdict == "converges-suspected",
        "sum 1/b diverges": nf.conductance_series.verdict == "diverges-suspected",
    }
    return ConstructionReport(chain, profiles, checks, nf, {"kappa_error": kappa_err, "b_range": (bmin, bmax)})
