"""Heat kernels, heat mass, bottom of the spectrum and potential theory.

Every quantity on an infinite graph is approached through Dirichlet problems
on an exhaustion by balls.  Radius ``R`` of an exhaustion step always names
the support: the Dirichlet problem lives on ``B_R(x0)`` and is killed on the
sphere ``S_{R+1}``, i.e. it is the interior of ``ball_truncation(R + 1)``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from heatgraph.domain import DirichletDomain
from heatgraph.graph import GraphOracle, Vertex, ball_truncation, bfs_distances
from heatgraph.series import CONVERGES, DIVERGES, classify_tail

log = logging.getLogger(__name__)

CONVERGED = "converged"
DIVERGING = "diverging"
INCONCLUSIVE = "inconclusive"

MONOTONE_SLACK = 1e-12


@dataclass
class MonotoneEstimate:
    """Monotone sequence of bounds over an exhaustion."""

    radii: list[int]
    values: list[float]
    direction: str  # "increasing" or "decreasing"
    verdict: str = INCONCLUSIVE
    note: str = ""

    @property
    def value(self) -> float:
        return self.values[-1]

    @property
    def increments(self) -> list[float]:
        return [b - a for a, b in zip(self.values, self.values[1:])]

    @property
    def last_increment(self) -> float:
        inc = self.increments
        return abs(inc[-1]) if inc else math.inf

    def is_monotone(self, slack: float = MONOTONE_SLACK) -> bool:
        sign = 1.0 if self.direction == "increasing" else -1.0
        return all(sign * d >= -slack for d in self.increments)


@dataclass
class HeatKernelValue:
    x: Vertex
    y: Vertex
    t: float
    estimate: MonotoneEstimate

    @property
    def value(self) -> float:
        return self.estimate.value


def default_radii(rmax: int, step: int = 4) -> list[int]:
    radii = list(range(step, rmax + 1, step))
    if not radii or radii[-1] != rmax:
        radii.append(rmax)
    return radii


_DOMAIN_CACHE: dict = {}


def exhaustion_domain(g: GraphOracle, x0: Vertex, R: int) -> DirichletDomain:
    """Dirichlet domain supported on ``B_R(x0)``; memoized per graph."""
    key = (id(g), x0, R)
    hit = _DOMAIN_CACHE.get(key)
    if hit is not None and hit[0] is g:
        return hit[1]
    d = ball_truncation(g, x0, R + 1)
    if len(_DOMAIN_CACHE) > 256:
        _DOMAIN_CACHE.clear()
    _DOMAIN_CACHE[key] = (g, d)
    return d


def _exhausted(d: DirichletDomain) -> bool:
    return d.is_closed


# --- Dirichlet kernels on one domain --------------------------------------------


def dirichlet_heat_kernel(d: DirichletDomain, t: float) -> np.ndarray:
    """Full matrix ``p_t(x, y)`` over the domain vertices (zero on the boundary)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = len(d)
    k = d.n_interior
    out = np.zeros((n, n))
    if k == 0:
        warnings.warn("domain has empty interior; the Dirichlet kernel vanishes", RuntimeWarning)
        return out
    if t == 0:
        out[:k, :k] = np.diag(1.0 / d.measure[:k])
        return out
    s = 1.0 / np.sqrt(d.measure[:k])
    if d.graded:
        # exp(-tL) applied to 1_y / m(y) gives the column p_t(., y)
        out[:k, :k] = d.semigroup_contour(t, np.diag(1.0 / d.measure[:k]))
    else:
        if d.dense:
            w, v = d.spectrum
            e = (v * np.exp(-t * w)) @ v.T
        else:
            e = spla.expm_multiply(-t * d.operator.tocsc(), np.eye(k))
        out[:k, :k] = s[:, None] * e * s[None, :]
    # the kernel is positive; negative entries are rounding noise far from the diagonal
    np.maximum(out, 0.0, out=out)
    return out


def _kernel_column(d: DirichletDomain, y: Vertex, ts: Sequence[float]) -> np.ndarray:
    """``p_t(., y)`` over the domain for each ``t``; shape ``(len(ts), len(d))``."""
    n = len(d)
    out = np.zeros((len(ts), n))
    j = d.interior_index(y)
    if j is None:
        return out
    k = d.n_interior
    s = 1.0 / np.sqrt(d.measure[:k])
    for a, t in enumerate(ts):
        if t == 0:
            out[a, j] = 1.0 / d.measure[j]
        elif d.graded:
            e = np.zeros(k)
            e[j] = 1.0 / d.measure[j]
            out[a, :k] = d.semigroup_contour(t, e)
        elif d.dense:
            w, v = d.spectrum
            out[a, :k] = s * (v @ (np.exp(-t * w) * v[j])) * s[j]
        else:
            e = np.zeros(k)
            e[j] = 1.0
            out[a, :k] = s * spla.expm_multiply(-t * d.operator.tocsc(), e) * s[j]
    np.maximum(out, 0.0, out=out)
    return out


def _mass_vector(d: DirichletDomain, t: float) -> np.ndarray:
    """``sum_y p_t(x, y) m(y)`` for every domain vertex ``x``."""
    n = len(d)
    k = d.n_interior
    out = np.zeros(n)
    if k == 0:
        return out
    sq = np.sqrt(d.measure[:k])
    if d.graded:
        out[:k] = d.semigroup_contour(t, np.ones(k))
        return out
    if d.dense:
        w, v = d.spectrum
        out[:k] = (v @ (np.exp(-t * w) * (v.T @ sq))) / sq
    else:
        out[:k] = spla.expm_multiply(-t * d.operator.tocsc(), sq) / sq
    return out


def semigroup_residual(d: DirichletDomain, s: float, t: float) -> float:
    """``max |p_{s+t} - sum_z p_s(., z) p_t(z, .) m(z)|`` over the domain."""
    ps = dirichlet_heat_kernel(d, s)
    pt = dirichlet_heat_kernel(d, t)
    pst = dirichlet_heat_kernel(d, s + t)
    return float(np.max(np.abs(pst - (ps * d.measure[None, :]) @ pt)))


# --- exhaustion-based estimators ---------------------------------------------------


def _verdict_increasing(values: list[float], tol: float, exact: bool) -> str:
    if exact:
        return CONVERGED
    inc = [b - a for a, b in zip(values, values[1:])]
    if len(inc) >= 2 and abs(inc[-1]) < tol and abs(inc[-2]) < tol:
        return CONVERGED
    return INCONCLUSIVE


def heat_kernel(
    g: GraphOracle,
    x: Vertex,
    y: Vertex,
    t: float,
    tol: float = 1e-8,
    Rmax: int = 24,
    radii: Sequence[int] | None = None,
) -> HeatKernelValue:
    """Minimal heat kernel ``p_t(x, y)`` as an increasing limit of Dirichlet kernels.

    The exhaustion is centred at ``g.root``.  Iteration stops once two
    successive increments fall below ``tol`` or the finite graph is exhausted.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    radii = list(radii) if radii is not None else default_radii(Rmax)
    reach = bfs_distances(g, g.root, max(radii))
    for v in (x, y):
        if v not in reach:
            raise ValueError(f"{v!r} lies outside B_{max(radii)}({g.root!r})")
    used, vals = [], []
    exact = False
    for R in radii:
        d = exhaustion_domain(g, g.root, R)
        col = _kernel_column(d, y, [t])[0]
        i = d.index.get(x)
        vals.append(float(col[i]) if i is not None else 0.0)
        used.append(R)
        if _exhausted(d):
            exact = True
            break
        inc = [b - a for a, b in zip(vals, vals[1:])]
        if len(inc) >= 2 and abs(inc[-1]) < tol and abs(inc[-2]) < tol:
            break
    est = MonotoneEstimate(used, vals, "increasing", _verdict_increasing(vals, tol, exact))
    if exact:
        est.note = "finite graph exhausted"
    return HeatKernelValue(x, y, t, est)


@dataclass
class MassEstimate:
    """Heat mass ``sum_y p_t(x, y) m(y)`` over an exhaustion with an SI verdict."""

    estimate: MonotoneEstimate
    limit: float
    verdict: str  # "SI-suspected", "complete-suspected" or "inconclusive"
    ratio: float = math.nan

    @property
    def deficit(self) -> float:
        return 1.0 - self.limit


def extrapolate_geometric(values: Sequence[float]) -> tuple[float, float]:
    """Limit of an increasing sequence from geometric decay of its last 3 increments.

    Returns ``(limit, ratio)``; ``ratio`` is NaN when the increments do not
    decay geometrically, in which case the last value is returned.
    """
    inc = [b - a for a, b in zip(values, values[1:])][-3:]
    if not inc:
        return values[-1], math.nan
    if all(abs(d) == 0 for d in inc[-2:]):
        return values[-1], 0.0
    if len(inc) < 3 or any(d <= 0 for d in inc):
        return values[-1], math.nan
    q1 = inc[1] / inc[0]
    q2 = inc[2] / inc[1]
    if not (0 < q1 < 1 and 0 < q2 < 1):
        return values[-1], math.nan
    q = math.sqrt(q1 * q2)
    return values[-1] + inc[-1] * q / (1 - q), q


def heat_mass(
    g: GraphOracle,
    x: Vertex,
    t: float,
    tol: float = 1e-8,
    Rmax: int = 24,
    radii: Sequence[int] | None = None,
) -> MassEstimate:
    if t <= 0:
        raise ValueError("t must be positive")
    radii = list(radii) if radii is not None else default_radii(Rmax)
    used, vals = [], []
    exact = False
    for R in radii:
        d = exhaustion_domain(g, g.root, R)
        i = d.index.get(x)
        vals.append(float(_mass_vector(d, t)[i]) if i is not None else 0.0)
        used.append(R)
        if _exhausted(d):
            exact = True
            break
    est = MonotoneEstimate(used, vals, "increasing", _verdict_increasing(vals, tol, exact))
    if exact:
        return MassEstimate(est, vals[-1], "complete-suspected", 0.0)
    limit, q = extrapolate_geometric(vals)
    limit = min(limit, 1.0)
    if abs(1.0 - limit) <= tol:
        verdict = "complete-suspected"
    elif not math.isnan(q) and limit < 1.0 - 10 * tol:
        verdict = "SI-suspected"
    else:
        verdict = INCONCLUSIVE
    return MassEstimate(est, limit, verdict, q)


def lambda0(
    g: GraphOracle,
    x0: Vertex | None = None,
    Rmax: int = 24,
    radii: Sequence[int] | None = None,
    tol: float = 1e-8,
) -> MonotoneEstimate:
    """Bottom of the Dirichlet spectrum on balls; non-increasing in the radius."""
    if Rmax < 1:
        raise ValueError("Rmax must be at least 1")
    x0 = g.root if x0 is None else x0
    radii = list(radii) if radii is not None else default_radii(Rmax)
    used, vals = [], []
    exact = False
    for R in radii:
        d = exhaustion_domain(g, x0, R)
        if d.n_interior == 0:
            raise ValueError("empty interior")
        vals.append(_smallest_eigenvalue(d))
        used.append(R)
        if _exhausted(d):
            exact = True
            break
    verdict = CONVERGED if exact else INCONCLUSIVE
    inc = [b - a for a, b in zip(vals, vals[1:])]
    if not exact and len(inc) >= 2 and abs(inc[-1]) < tol and abs(inc[-2]) < tol:
        verdict = CONVERGED
    return MonotoneEstimate(used, vals, "decreasing", verdict, "finite graph exhausted" if exact else "")


def _smallest_eigenvalue(d: DirichletDomain) -> float:
    if d.graded:
        # shift-invert on the unsymmetrized M-matrix stays accurate under grading
        val = spla.eigs(d.laplacian, k=1, sigma=0, which="LM", return_eigenvectors=False)
        return float(val[0].real)
    if d.dense:
        return float(d.spectrum[0][0])
    # shift-invert about a negative shift keeps the factorization nonsingular
    val = spla.eigsh(d.operator.tocsc(), k=1, sigma=-1e-3, which="LM", return_eigenvectors=False)
    return float(val[0])


# --- potential theory ------------------------------------------------------------------


def _dirichlet_laplacian(d: DirichletDomain) -> sp.csc_matrix:
    """Unsymmetrized Dirichlet Laplacian ``L_D`` on the interior block."""
    return d.laplacian


def green_column(d: DirichletDomain, y: Vertex) -> np.ndarray:
    """``g_D(., y)``: solves ``L_D u = 1_y / m(y)`` on the interior, zero outside."""
    j = d.interior_index(y)
    out = np.zeros(len(d))
    if j is None:
        return out
    assert not d.is_closed, "Green function of a closed finite graph is infinite"
    rhs = np.zeros(d.n_interior)
    rhs[j] = 1.0 / d.measure[j]
    out[: d.n_interior] = spla.spsolve(_dirichlet_laplacian(d), rhs)
    return out


@dataclass
class GreenEstimate:
    estimate: MonotoneEstimate
    verdict: str  # "transient-suspected", "recurrent-suspected" or "inconclusive"


def _growth_verdict(radii: list[int], vals: list[float], tol: float, bounded: str, unbounded: str) -> str:
    """Classify an increasing sequence as bounded or unbounded from its increments.

    Bounded when the last two increments are below ``tol`` or when the
    increments per unit radius decay summably; unbounded when they do not.
    """
    inc = [b - a for a, b in zip(vals, vals[1:])]
    if len(inc) >= 2 and abs(inc[-1]) < tol and abs(inc[-2]) < tol:
        return bounded
    if len(inc) < 3:
        return INCONCLUSIVE
    rates = [d / (r1 - r0) for d, r0, r1 in zip(inc, radii, radii[1:])]
    fit = classify_tail(rates, radii[1:])
    if fit.verdict == CONVERGES:
        return bounded
    if fit.verdict == DIVERGES:
        return unbounded
    return INCONCLUSIVE


def green(
    g: GraphOracle,
    x: Vertex,
    y: Vertex,
    Rmax: int = 24,
    radii: Sequence[int] | None = None,
    tol: float = 1e-3,
    x0: Vertex | None = None,
) -> GreenEstimate:
    """Green function ``g(x, y)`` as the increasing limit of Dirichlet Green functions.

    The exhaustion is centred at ``x0`` (default ``x``).  ``tol`` bounds the
    per-step increments for a transient verdict.
    """
    x0 = x if x0 is None else x0
    radii = list(radii) if radii is not None else default_radii(Rmax)
    used, vals = [], []
    for R in radii:
        d = exhaustion_domain(g, x0, R)
        if d.is_closed:
            raise ValueError("finite graphs are recurrent; the Green function is infinite")
        col = green_column(d, y)
        i = d.index.get(x)
        vals.append(float(col[i]) if i is not None else 0.0)
        used.append(R)
    verdict = _growth_verdict(used, vals, tol, "transient-suspected", "recurrent-suspected")
    est = MonotoneEstimate(used, vals, "increasing", CONVERGED if verdict.startswith("transient") else INCONCLUSIVE)
    if verdict.startswith("recurrent"):
        est.verdict = DIVERGING
    return GreenEstimate(est, verdict)


def energy(g: GraphOracle, phi: dict) -> float:
    """``Q(phi) = 1/2 sum_{x,y} b(x, y) (phi(x) - phi(y))^2`` for finitely supported ``phi``.

    Missing vertices count as zero; every edge touching the support is summed
    once from each side.
    """
    total = 0.0
    for x, fx in phi.items():
        for y, w in g.neighbors(x):
            fy = phi.get(y, 0.0)
            if y in phi:
                total += 0.5 * w * (fx - fy) ** 2
            else:
                total += w * fx**2
    return total


@dataclass
class CapacityEstimate:
    estimate: MonotoneEstimate
    potentials: dict = field(default_factory=dict, repr=False)
    verdict: str = INCONCLUSIVE  # "positive-suspected", "zero-suspected" or "inconclusive"


def equilibrium_potential(d: DirichletDomain, x: Vertex) -> dict:
    """Minimizer of ``Q`` over ``phi`` supported on the interior with ``phi(x) = 1``."""
    col = green_column(d, x)
    col /= col[d.index[x]]
    return {v: float(c) for v, c in zip(d.vertices, col) if c != 0.0}


def capacity(
    g: GraphOracle,
    x: Vertex,
    Rmax: int = 24,
    radii: Sequence[int] | None = None,
    tol: float = 1e-3,
    x0: Vertex | None = None,
) -> CapacityEstimate:
    """``cap(x) = inf Q(phi)`` over ``phi`` supported in ``B_R`` with ``phi(x) = 1``.

    The minimizer is the normalized Dirichlet Green function, so
    ``cap_R(x) = 1 / g_R(x, x)``; values decrease in ``R``.
    """
    x0 = x if x0 is None else x0
    radii = list(radii) if radii is not None else default_radii(Rmax)
    used, vals = [], []
    pots = {}
    for R in radii:
        d = exhaustion_domain(g, x0, R)
        if d.is_closed:
            raise ValueError("capacity vanishes on finite graphs")
        phi = equilibrium_potential(d, x)
        vals.append(energy(g, phi))
        used.append(R)
        pots[R] = phi
    # cap_R = 1 / g_R(x, x): capacity stays positive iff the Green function stays bounded
    verdict = _growth_verdict(used, [1.0 / v for v in vals], tol, "positive-suspected", "zero-suspected")
    est = MonotoneEstimate(used, vals, "decreasing", CONVERGED if verdict.startswith("positive") else INCONCLUSIVE)
    return CapacityEstimate(est, pots, verdict)


def uniform_transience_probe(
    g: GraphOracle,
    sample: Sequence[Vertex],
    Rmax: int = 24,
    radii: Sequence[int] | None = None,
    tol: float = 1e-3,
) -> tuple[float, str, dict]:
    """Minimum converged capacity over a vertex sample.

    Returns ``(min_cap, verdict, per_vertex)`` with verdict
    ``"positive-suspected"`` when every sampled capacity converged to a
    positive value and ``"zero-suspected"`` when any looks like it vanishes.
    """
    per = {v: capacity(g, v, Rmax=Rmax, radii=radii, tol=tol) for v in sample}
    lo = min(c.estimate.value for c in per.values())
    verdicts = {c.verdict for c in per.values()}
    if "zero-suspected" in verdicts:
        verdict = "zero-suspected"
    elif verdicts == {"positive-suspected"} and lo > 0:
        verdict = "positive-suspected"
    else:
        verdict = INCONCLUSIVE
    return lo, verdict, per
