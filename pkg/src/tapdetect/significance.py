"""Paired significance tests over per-participant score differences.

The t-test converts its statistic to a two-sided p-value through the
regularized incomplete beta function; the Wilcoxon signed-rank test uses
the exact null distribution (all sign assignments, computed by dynamic
programming over doubled midranks) for n <= 25 and a continuity-corrected
normal approximation beyond that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, ndtr


@dataclass(frozen=True)
class TestResult:
    statistic: float | None
    p_value: float | None
    detail: str = ""

    @property
    def defined(self) -> bool:
        return self.p_value is not None


def student_t_sf(t: float, df: int) -> float:
    """P(T > t) for Student-t with df degrees of freedom (t >= 0)."""
    x = df / (df + t * t)
    return 0.5 * float(betainc(df / 2.0, 0.5, x))


def paired_t_test(differences) -> TestResult:
    """Two-sided paired t-test on a vector of paired differences.

    Zero variance (all differences equal) has no defined statistic and
    returns an undefined sentinel rather than infinity.
    """
    d = np.asarray(differences, dtype=np.float64)
    n = len(d)
    if n < 2:
        return TestResult(None, None, "need at least 2 differences")
    sd = d.std(ddof=1)
    if sd == 0:
        return TestResult(None, None, "zero variance")
    t = d.mean() / (sd / math.sqrt(n))
    p = 2.0 * student_t_sf(abs(t), n - 1)
    return TestResult(statistic=float(t), p_value=min(p, 1.0))


def _signed_rank_sums(d: np.ndarray) -> tuple[float, float, np.ndarray]:
    """(W+, W-, midranks) of nonzero differences; ties get midranks."""
    magnitudes = np.abs(d)
    order = np.argsort(magnitudes, kind="stable")
    ranks = np.empty(len(d))
    sorted_mag = magnitudes[order]
    i = 0
    while i < len(d):
        j = i
        while j < len(d) and sorted_mag[j] == sorted_mag[i]:
            j += 1
        ranks[order[i:j]] = (i + 1 + j) / 2.0
        i = j
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    return w_plus, w_minus, ranks


def _exact_wilcoxon_p(ranks: np.ndarray, w: float) -> float:
    """P(min(W+, W-) <= w) under the exact null, via DP on doubled ranks."""
    doubled = np.round(ranks * 2).astype(int)
    total = int(doubled.sum())
    dp = np.zeros(total + 1, dtype=np.float64)
    dp[0] = 1.0
    for r in doubled:
        dp[r:] += dp[:-r].copy()
    dp /= 2.0 ** len(ranks)
    w2 = int(round(w * 2))
    low = dp[: w2 + 1].sum()
    high = dp[total - w2 :].sum()
    return float(min(1.0, low + high))


def wilcoxon_signed_rank(differences) -> TestResult:
    """Two-sided Wilcoxon signed-rank test; W is the smaller rank sum.

    Zeros are dropped first; an all-zero input is undefined. Exact null
    distribution for n <= 25, normal approximation with continuity
    correction above.
    """
    d = np.asarray(differences, dtype=np.float64)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return TestResult(None, None, "all differences are zero")
    w_plus, w_minus, ranks = _signed_rank_sums(d)
    w = min(w_plus, w_minus)
    if n <= 25:
        p = _exact_wilcoxon_p(ranks, w)
        return TestResult(statistic=w, p_value=p, detail="exact")
    mean = n * (n + 1) / 4.0
    # tie correction over groups of equal magnitude
    _, counts = np.unique(np.abs(d), return_counts=True)
    tie_term = float(np.sum(counts**3 - counts)) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if var <= 0:
        return TestResult(None, None, "degenerate variance")
    z = (w - mean + 0.5) / math.sqrt(var)
    p = 2.0 * float(ndtr(z))
    return TestResult(statistic=w, p_value=min(p, 1.0), detail="normal-approximation")


def exact_wilcoxon_distribution(n: int) -> np.ndarray:
    """Null pmf of W+ over ranks 1..n (no ties); index = rank sum."""
    total = n * (n + 1) // 2
    dp = np.zeros(total + 1, dtype=np.float64)
    dp[0] = 1.0
    for r in range(1, n + 1):
        dp[r:] += dp[:-r]
    return dp / 2.0**n


@dataclass(frozen=True)
class PairedComparison:
    differences: tuple[float, ...]
    t_test: TestResult
    wilcoxon: TestResult

    def to_json_dict(self) -> dict:
        return {
            "differences": list(self.differences),
            "t_statistic": self.t_test.statistic,
            "t_p_value": self.t_test.p_value,
            "wilcoxon_w": self.wilcoxon.statistic,
            "wilcoxon_p_value": self.wilcoxon.p_value,
        }


def paired_comparison(values_a, values_b) -> PairedComparison:
    """Run both paired tests on matched score vectors (a minus b)."""
    a = np.asarray(values_a, dtype=np.float64)
    b = np.asarray(values_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"paired vectors differ in shape: {a.shape} vs {b.shape}")
    d = a - b
    return PairedComparison(
        differences=tuple(float(x) for x in d),
        t_test=paired_t_test(d),
        wilcoxon=wilcoxon_signed_rank(d),
    )
