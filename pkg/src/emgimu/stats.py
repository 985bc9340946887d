"""Statistical comparison harness.

Each modality comparison runs the same protocol: Lilliefors normality on
both groups, then an independent two-sample t-test when both pass
(p > 0.05) or a Wilcoxon signed-rank test otherwise, plus Cohen's d for
the effect size.  Four fixed hypotheses compare EMG against accelerometer,
gyroscope, magnetometer and the combined IMU.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats as sstats

from .errors import (
    AllZeroDifferences,
    LengthMismatch,
    ParticipantMismatch,
    TooFewSamples,
    ZeroPooledStd,
    ZeroVariance,
)

ALPHA_DEFAULT = 0.05


@dataclass(frozen=True)
class SampleGroup:
    """One value per participant for a named condition."""

    label: str
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError(f"group {self.label!r} contains non-finite values")

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


# --- Lilliefors ----------------------------------------------------------------


def _ks_stat_fitted_normal(x: np.ndarray) -> float:
    n = len(x)
    z = np.sort((x - x.mean()) / x.std(ddof=1))
    cdf = sstats.norm.cdf(z)
    i = np.arange(1, n + 1)
    return float(max((i / n - cdf).max(), (cdf - (i - 1) / n).max()))


@lru_cache(maxsize=32)
def _lilliefors_null(n: int, sims: int, seed: int) -> np.ndarray:
    """Sorted null distribution of the Lilliefors statistic for size n."""
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((sims, n))
    mu = samples.mean(axis=1, keepdims=True)
    sd = samples.std(axis=1, ddof=1, keepdims=True)
    z = np.sort((samples - mu) / sd, axis=1)
    cdf = sstats.norm.cdf(z)
    i = np.arange(1, n + 1)
    d = np.maximum((i / n - cdf).max(axis=1), (cdf - (i - 1) / n).max(axis=1))
    return np.sort(d)


def lilliefors(values, sims: int = 10_000, seed: int = 12345) -> float:
    """Monte-Carlo Lilliefors p-value for normality with estimated mean/std.

    Degenerate (zero-variance) samples return p = 0.  The null table is
    simulated once per (n, sims, seed) and cached, so repeated calls at the
    same sample size are cheap and fully reproducible.
    """
    x = np.asarray(values, float)
    if len(x) < 4:
        raise TooFewSamples("Lilliefors needs at least 4 samples")
    if x.std(ddof=1) == 0:
        return 0.0
    d_obs = _ks_stat_fitted_normal(x)
    null = _lilliefors_null(len(x), sims, seed)
    n_ge = len(null) - np.searchsorted(null, d_obs - 1e-15, side="left")
    return float((1 + n_ge) / (sims + 1))


# --- t-test and Wilcoxon --------------------------------------------------------


def t_test_independent(a, b) -> tuple[float, float]:
    """Welch's two-sided independent two-sample t-test."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if len(a) < 2 or len(b) < 2:
        raise TooFewSamples("each group needs at least 2 values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0 and vb == 0:
        if a.mean() == b.mean():
            return 0.0, 1.0
        raise ZeroVariance("both groups are constant but unequal")
    se2 = va / len(a) + vb / len(b)
    t = float((a.mean() - b.mean()) / math.sqrt(se2))
    if va == 0 or vb == 0:
        df = max(len(a), len(b)) - 1.0
    else:
        df = se2 ** 2 / ((va / len(a)) ** 2 / (len(a) - 1) + (vb / len(b)) ** 2 / (len(b) - 1))
    p = float(2 * sstats.t.sf(abs(t), df))
    return t, p


def t_test_paired(a, b) -> tuple[float, float]:
    """Two-sided paired t-test on the per-participant differences."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if len(a) != len(b):
        raise LengthMismatch(f"paired groups differ in length: {len(a)} vs {len(b)}")
    d = a - b
    if len(d) < 2:
        raise TooFewSamples("paired t-test needs at least 2 pairs")
    sd = d.std(ddof=1)
    if sd == 0:
        if d.mean() == 0:
            return 0.0, 1.0
        raise ZeroVariance("constant nonzero differences")
    t = float(d.mean() / (sd / math.sqrt(len(d))))
    return t, float(2 * sstats.t.sf(abs(t), len(d) - 1))


def _signed_ranks(diffs: np.ndarray) -> np.ndarray:
    order = np.argsort(np.abs(diffs), kind="stable")
    ranks = np.empty(len(diffs))
    mags = np.abs(diffs)[order]
    i = 0
    while i < len(diffs):
        j = i
        while j + 1 < len(diffs) and mags[j + 1] == mags[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _exact_signed_rank_p(ranks: np.ndarray, w: float) -> float:
    # distribution of W+ over all 2^n sign assignments, computed by
    # convolving rank weights; ranks doubled so mid-ranks stay integral
    r2 = np.round(ranks * 2).astype(int)
    total = int(r2.sum())
    coeffs = np.zeros(total + 1)
    coeffs[0] = 1.0
    for r in r2:
        shifted = np.zeros_like(coeffs)
        shifted[r:] = coeffs[:len(coeffs) - r]
        coeffs = coeffs + shifted
    w2 = int(round(2 * w))
    prob_le = coeffs[:w2 + 1].sum() / 2 ** len(ranks)
    return min(1.0, 2.0 * prob_le)


def wilcoxon_signed_rank(a, b, exact_limit: int = 25) -> tuple[float, float]:
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are dropped; ties get mid-ranks.  The p-value is exact
    (full sign-assignment distribution) up to ``exact_limit`` pairs and a
    continuity-corrected normal approximation above.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if len(a) != len(b):
        raise LengthMismatch(f"paired groups differ in length: {len(a)} vs {len(b)}")
    diffs = a - b
    diffs = diffs[diffs != 0]
    n = len(diffs)
    if n == 0:
        raise AllZeroDifferences("all paired differences are zero")
    ranks = _signed_ranks(diffs)
    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks[diffs < 0].sum())
    w = min(w_plus, w_minus)

    if n <= exact_limit:
        return w, _exact_signed_rank_p(ranks, w)

    mean_w = n * (n + 1) / 4.0
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(((counts ** 3 - counts)).sum()) / 48.0
    sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0 - tie_term)
    z = (w - mean_w + 0.5) / sigma
    return w, float(min(1.0, 2 * sstats.norm.cdf(z)))


# --- effect size ----------------------------------------------------------------


def cohens_d(a_mean: float, a_std: float, b_mean: float, b_std: float) -> float:
    """Standardized mean difference with the equal-n pooled std
    sqrt((s1^2 + s2^2) / 2)."""
    if a_std < 0 or b_std < 0:
        raise ValueError("standard deviations must be non-negative")
    pooled = math.sqrt((a_std ** 2 + b_std ** 2) / 2.0)
    if pooled == 0:
        raise ZeroPooledStd("both groups have zero spread")
    return (a_mean - b_mean) / pooled


def cohens_d_groups(a, b) -> float:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return cohens_d(float(a.mean()), float(a.std(ddof=1)),
                    float(b.mean()), float(b.std(ddof=1)))


# --- the gated comparison and the four hypotheses --------------------------------


@dataclass(frozen=True)
class GatedResult:
    normal_left: bool
    normal_right: bool
    lilliefors_p_left: float
    lilliefors_p_right: float
    test_used: str
    statistic: float
    p_value: float


def gated_test(a, b, alpha: float = ALPHA_DEFAULT, sims: int = 10_000,
               seed: int = 12345, fully_paired: bool = False) -> GatedResult:
    """Normality-gated significance test.

    t-test iff both Lilliefors p-values exceed alpha, Wilcoxon otherwise.
    The default follows the protocol as published (independent t beside a
    paired Wilcoxon); ``fully_paired`` swaps in the paired t-test instead.
    Identical paired groups short-circuit to p = 1 (no evidence either way).
    """
    p_a = lilliefors(a, sims=sims, seed=seed)
    p_b = lilliefors(b, sims=sims, seed=seed)
    normal_a, normal_b = p_a > alpha, p_b > alpha
    if normal_a and normal_b:
        if fully_paired:
            stat, p = t_test_paired(a, b)
            used = "t_paired"
        else:
            stat, p = t_test_independent(a, b)
            used = "t_independent"
    else:
        used = "wilcoxon_signed_rank"
        try:
            stat, p = wilcoxon_signed_rank(a, b)
        except AllZeroDifferences:
            stat, p = 0.0, 1.0
    return GatedResult(normal_a, normal_b, p_a, p_b, used, stat, p)


HYPOTHESES = (
    ("H1", "accel"),
    ("H2", "gyro"),
    ("H3", "mag"),
    ("H4", "imu_combined"),
)


@dataclass(frozen=True)
class TestResult:
    hypothesis: str            # H1..H4, claim: mean(EMG) >= mean(right)
    left: str
    right: str
    mean_left: float
    mean_right: float
    normal_left: bool
    normal_right: bool
    test_used: str
    statistic: float
    p_value: float
    cohens_d: float
    decision: str              # "reject" | "fail_to_reject"
    alpha: float

    @property
    def star(self) -> str:
        return "*" if self.p_value < self.alpha else ""


def run_hypotheses(groups: dict, alpha: float = ALPHA_DEFAULT,
                   sims: int = 10_000, seed: int = 12345,
                   fully_paired: bool = False) -> list[TestResult]:
    """Evaluate H1-H4 (EMG >= each IMU modality) on per-participant groups.

    ``groups`` maps modality name -> SampleGroup; all five keys (emg,
    accel, gyro, mag, imu_combined) must be present with one value per
    participant in the same order.  A hypothesis is rejected when the
    difference is significant at ``alpha`` AND points against EMG.
    """
    required = ("emg",) + tuple(right for _, right in HYPOTHESES)
    for key in required:
        if key not in groups:
            raise ParticipantMismatch(f"missing group {key!r}")
    n = len(groups["emg"].values)
    for key in required:
        if len(groups[key].values) != n:
            raise ParticipantMismatch(
                f"group {key!r} has {len(groups[key].values)} values, expected {n}")

    emg = groups["emg"]
    results = []
    for hyp_id, right_key in HYPOTHESES:
        right = groups[right_key]
        gated = gated_test(emg.values, right.values, alpha=alpha, sims=sims,
                           seed=seed, fully_paired=fully_paired)
        try:
            d = cohens_d_groups(emg.values, right.values)
        except ZeroPooledStd:
            d = 0.0
        significant = gated.p_value < alpha
        against_emg = emg.mean < right.mean
        results.append(TestResult(
            hypothesis=hyp_id, left="emg", right=right_key,
            mean_left=emg.mean, mean_right=right.mean,
            normal_left=gated.normal_left, normal_right=gated.normal_right,
            test_used=gated.test_used, statistic=gated.statistic,
            p_value=gated.p_value, cohens_d=d,
            decision="reject" if (significant and against_emg) else "fail_to_reject",
            alpha=alpha))
    return results


def results_to_json(results: list[TestResult], path):
    payload = [{
        "hypothesis": r.hypothesis, "left": r.left, "right": r.right,
        "mean_left": r.mean_left, "mean_right": r.mean_right,
        "normal_left": r.normal_left, "normal_right": r.normal_right,
        "test_used": r.test_used, "statistic": r.statistic,
        "p_value": r.p_value, "cohens_d": r.cohens_d,
        "decision": r.decision, "alpha": r.alpha,
    } for r in results]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def results_to_markdown(results: list[TestResult], path=None) -> str:
    lines = [
        "| hypothesis | comparison | mean L | mean R | test | p | d | decision |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for r in results:
        lines.append(
            f"| {r.hypothesis} | {r.left} >= {r.right} | {r.mean_left:.3f} "
            f"| {r.mean_right:.3f} | {r.test_used} | {r.p_value:.4g}{r.star} "
            f"| {r.cohens_d:.2f} | {r.decision} |")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
