"""Brute-force reference implementations used to cross-check the pipeline.

Everything here is written straight from the defining formula — plain
loops, explicit DFT matrix, exhaustive enumeration — and deliberately
shares no code with the production modules it audits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


# --- time-domain features -----------------------------------------------------


def mav(x) -> float:
    return sum(abs(v) for v in x) / len(x)


def variance(x) -> float:
    m = sum(x) / len(x)
    return sum((v - m) ** 2 for v in x) / (len(x) - 1)


def rms(x) -> float:
    return math.sqrt(sum(v * v for v in x) / len(x))


def waveform_length(x) -> float:
    return sum(abs(x[i + 1] - x[i]) for i in range(len(x) - 1))


def damv(x) -> float:
    return waveform_length(x) / (len(x) - 1)


def dasdv(x) -> float:
    return math.sqrt(sum((x[i + 1] - x[i]) ** 2 for i in range(len(x) - 1)) / (len(x) - 1))


def zero_crossings(x, eps=0.0) -> int:
    c = 0
    for i in range(len(x) - 1):
        if x[i] * x[i + 1] < 0 and abs(x[i] - x[i + 1]) >= eps:
            c += 1
    return c


def myopulse_rate(x, thresh) -> float:
    return sum(1 for v in x if abs(v) >= thresh) / len(x)


def willison_amplitude(x, thresh) -> int:
    return sum(1 for i in range(len(x) - 1) if abs(x[i + 1] - x[i]) >= thresh)


def slope_sign_changes(x, eps=0.0) -> int:
    c = 0
    for i in range(1, len(x) - 1):
        if (x[i] - x[i - 1]) * (x[i] - x[i + 1]) > eps:
            c += 1
    return c


def histogram(x, sigmas=3.0, bins=10):
    n = len(x)
    m = sum(x) / n
    sd = math.sqrt(sum((v - m) ** 2 for v in x) / n)
    counts = [0] * bins
    if sd == 0:
        counts[(bins - 1) // 2] = n
        return counts
    lo = m - sigmas * sd
    width = 2 * sigmas * sd
    for v in x:
        b = int(math.floor((v - lo) / width * bins))
        counts[min(max(b, 0), bins - 1)] += 1
    return counts


def ar_coeffs_toeplitz(x, order=4):
    """AR fit by directly solving the Yule-Walker normal equations."""
    n = len(x)
    m = sum(x) / n
    xc = [v - m for v in x]
    r = [sum(xc[i] * xc[i + k] for i in range(n - k)) / n for k in range(order + 1)]
    if r[0] == 0:
        return [0.0] * order
    R = np.empty((order, order))
    for i in range(order):
        for j in range(order):
            R[i, j] = r[abs(i - j)]
    return list(np.linalg.solve(R, np.array(r[1:])))


# --- spectral features via an explicit DFT matrix ------------------------------


def dft_periodogram(x, rate_hz):
    """One-sided energy spectrum of the zero-meaned, Hann-weighted samples,
    computed with an explicit complex-exponential matrix (no FFT)."""
    x = np.asarray(x, float)
    n = len(x)
    m = x.mean()
    hann = np.array([0.5 * (1 - math.cos(2 * math.pi * i / (n - 1))) for i in range(n)])
    xw = (x - m) * hann
    n_bins = n // 2 + 1
    k = np.arange(n_bins)[:, None]
    t = np.arange(n)[None, :]
    basis = np.exp(-2j * math.pi * k * t / n)
    coef = basis @ xw
    p = np.abs(coef) ** 2 / n
    for kk in range(1, n_bins):
        if not (n % 2 == 0 and kk == n_bins - 1):
            p[kk] *= 2.0
    f = np.arange(n_bins) * rate_hz / n
    return f, p


def freq_feature_dict(x, rate_hz, fr_split_hz=250.0, psr_halfwidth_hz=10.0):
    f, p = dft_periodogram(x, rate_hz)
    sm0 = float(p.sum())
    out = {}
    if sm0 == 0:
        return {k: 0.0 for k in
                ("MNF", "MDF", "PKF", "TTP", "SM1", "SM2", "SM3", "FR", "PSR", "VCF")}
    sm1 = float((p * f).sum())
    sm2 = float((p * f ** 2).sum())
    sm3 = float((p * f ** 3).sum())
    out["MNF"] = sm1 / sm0
    acc = 0.0
    for k in range(len(p)):
        acc += p[k]
        if acc >= sm0 / 2:
            out["MDF"] = f[k]
            break
    pk = int(np.argmax(p))
    out["PKF"] = f[pk]
    out["TTP"] = sm0
    out["SM1"], out["SM2"], out["SM3"] = sm1, sm2, sm3
    low = sum(p[k] for k in range(len(p)) if f[k] <= fr_split_hz)
    high = sm0 - low
    out["FR"] = low / high if high > 0 else (math.inf if low > 0 else 0.0)
    out["PSR"] = sum(p[k] for k in range(len(p))
                     if abs(f[k] - f[pk]) <= psr_halfwidth_hz + 1e-9) / sm0
    out["VCF"] = sm2 / sm0 - (sm1 / sm0) ** 2
    return out


# --- quality metrics ----------------------------------------------------------


def calibration_noise(x) -> float:
    n = len(x)
    m = sum(x) / n
    return math.sqrt(sum((v - m) ** 2 for v in x) / n)


def snr_db(activation, resting) -> float:
    return 20 * math.log10(rms(activation) / rms(resting))


def smr_db(x, rate_hz) -> float:
    x = np.asarray(x, float)
    n = len(x)
    n_bins = n // 2 + 1
    k = np.arange(n_bins)[:, None]
    t = np.arange(n)[None, :]
    coef = np.exp(-2j * math.pi * k * t / n) @ x
    p = np.abs(coef) ** 2 / n
    for kk in range(1, n_bins):
        if not (n % 2 == 0 and kk == n_bins - 1):
            p[kk] *= 2.0
    f = np.arange(n_bins) * rate_hz / n
    p_full = sum(p[i] for i in range(n_bins) if f[i] <= 500.0)
    p_motion = sum(p[i] for i in range(n_bins) if f[i] <= 20.0)
    return 10 * math.log10(p_full / p_motion)


def cohens_d(a_mean, a_std, b_mean, b_std) -> float:
    return (a_mean - b_mean) / math.sqrt((a_std ** 2 + b_std ** 2) / 2)


# --- clustering / statistics --------------------------------------------------


def davies_bouldin(X, y) -> float:
    X = np.asarray(X, float)
    labels = sorted(set(int(v) for v in y))
    cents, scatters = [], []
    for lab in labels:
        pts = X[np.asarray(y) == lab]
        c = pts.mean(axis=0)
        cents.append(c)
        scatters.append(float(np.mean([math.dist(p, c) for p in pts])))
    k = len(labels)
    total = 0.0
    for i in range(k):
        worst = 0.0
        for j in range(k):
            if i == j:
                continue
            sep = math.dist(cents[i], cents[j])
            worst = max(worst, (scatters[i] + scatters[j]) / sep)
        total += worst
    return total / k


def wilcoxon_exact_enumeration(a, b):
    """Two-sided exact signed-rank p by enumerating all 2^n sign patterns."""
    diffs = [ai - bi for ai, bi in zip(a, b) if ai != bi]
    n = len(diffs)
    mags = sorted(range(n), key=lambda i: abs(diffs[i]))
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(diffs[mags[j + 1]]) == abs(diffs[mags[i]]):
            j += 1
        avg = (i + j) / 2 + 1
        for t in range(i, j + 1):
            ranks[mags[t]] = avg
        i = j + 1
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    w_minus = sum(r for d, r in zip(diffs, ranks) if d < 0)
    w = min(w_plus, w_minus)

    count = 0
    for pattern in range(1 << n):
        s = sum(ranks[i] for i in range(n) if pattern >> i & 1)
        if s <= w + 1e-12:
            count += 1
    p = 2 * count / (1 << n)
    return w, min(1.0, p)


# --- randomized production-vs-oracle harness -----------------------------------


@dataclass
class OracleReport:
    checked: int
    max_rel_dev: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def default_window_factory(rng: np.random.Generator) -> np.ndarray:
    """Random 600-sample window with occasional rough edges (offsets, spikes)."""
    n = 600
    x = rng.standard_normal(n) * rng.uniform(0.5, 50.0)
    if rng.random() < 0.3:
        x += rng.uniform(-30, 30)
    if rng.random() < 0.3:
        f = rng.uniform(5, 900)
        x += rng.uniform(1, 40) * np.sin(2 * np.pi * f * np.arange(n) / 2000.0)
    if rng.random() < 0.1:
        x[rng.integers(0, n)] += rng.uniform(-200, 200)
    return x


def oracle_check(production_fn, oracle_fn, trials=1000, tolerance=1e-9,
                 input_factory=default_window_factory, seed=0) -> OracleReport:
    """Run both functions on seeded random inputs and compare elementwise.

    Deviation is relative to the larger magnitude; exact zeros on both
    sides count as agreement.  Failing trials are recorded with their
    index so they can be replayed.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = []
    for trial in range(trials):
        x = input_factory(rng)
        got = np.atleast_1d(np.asarray(production_fn(x), float))
        want = np.atleast_1d(np.asarray(oracle_fn(x), float))
        denom = np.maximum(np.abs(got), np.abs(want))
        denom[denom == 0] = 1.0
        dev = float(np.max(np.abs(got - want) / denom))
        worst = max(worst, dev)
        if dev > tolerance:
            failures.append((trial, dev))
    return OracleReport(checked=trials, max_rel_dev=worst, failures=failures)
