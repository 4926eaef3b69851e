"""Heuristic convergence classification of positive series from finitely many terms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DIVERGES = "diverges-suspected"
CONVERGES = "converges-suspected"
INCONCLUSIVE = "inconclusive"

# power-law thresholds on the fitted decay exponent p of a_r ~ c r^-p
P_DIVERGE = 1.05
P_CONVERGE = 1.2
# exponential rate per unit index that counts as geometric decay/growth
EXP_RATE = 0.01


@dataclass(frozen=True)
class TailFit:
    verdict: str
    exponent: float  # fitted p in a_r ~ c r^-p (NaN if unused)
    rate: float  # fitted s in a_r ~ c e^{s r} (NaN if unused)
    model: str  # "power", "exponential", "degenerate"


def _lsq(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sum((A @ coef - y) ** 2))
    return float(coef[0]), resid


def classify_tail(terms: Sequence[float], index: Sequence[float] | None = None) -> TailFit:
    """Classify ``sum a_r`` as convergent or divergent from its tail.

    The last half of the terms (at least three) is fitted both to
    ``c r^-p`` and to ``c e^{s r}``; whichever fits better in log space
    decides.  Power laws diverge for ``p <= 1.05``, converge for
    ``p >= 1.2`` and are inconclusive in between.
    """
    a = np.asarray(terms, dtype=float)
    r = np.arange(1, len(a) + 1, dtype=float) if index is None else np.asarray(index, dtype=float)
    if len(a) < 3:
        return TailFit(INCONCLUSIVE, math.nan, math.nan, "degenerate")
    k = max(3, len(a) // 2)
    a, r = a[-k:], r[-k:]
    if np.any(np.isinf(a)):
        return TailFit(DIVERGES, math.nan, math.nan, "degenerate")
    if np.all(a == 0):
        return TailFit(CONVERGES, math.inf, math.nan, "degenerate")
    if np.any(a <= 0) or np.any(r <= 0):
        return TailFit(INCONCLUSIVE, math.nan, math.nan, "degenerate")
    la = np.log(a)
    slope_p, res_p = _lsq(np.log(r), la)
    slope_e, res_e = _lsq(r, la)
    p = -slope_p
    if res_e < res_p and abs(slope_e) > EXP_RATE:
        verdict = CONVERGES if slope_e < 0 else DIVERGES
        return TailFit(verdict, p, slope_e, "exponential")
    if p <= P_DIVERGE:
        verdict = DIVERGES
    elif p >= P_CONVERGE:
        verdict = CONVERGES
    else:
        verdict = INCONCLUSIVE
    return TailFit(verdict, p, slope_e, "power")
