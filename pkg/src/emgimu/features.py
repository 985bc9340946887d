"""Sliding-window segmentation and per-window feature extraction.

Each 300 ms window yields 34 values on an EMG channel and 32 on an IMU
channel: ten time-domain scalars (MYOP and WAMP are EMG-only because their
thresholds come from EMG calibration), a 10-bin histogram, four AR
coefficients and ten spectral descriptors from a Hann-windowed
periodogram.  Batched kernels do the heavy lifting; the single-window
functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySelection, UnalignedLabels
from .session import (
    Channel,
    ChannelKind,
    Gesture,
    LabelTrack,
    Modality,
    Placement,
    Recording,
)

TIME_SCALARS = ("MAV", "VAR", "RMS", "WL", "DAMV", "DASDV", "ZC", "MYOP", "WAMP", "SSC")
HIST_NAMES = tuple(f"HIST{i}" for i in range(10))
AR_NAMES = ("AR1", "AR2", "AR3", "AR4")
FREQ_NAMES = ("MNF", "MDF", "PKF", "TTP", "SM1", "SM2", "SM3", "FR", "PSR", "VCF")

EMG_FEATURES = TIME_SCALARS + HIST_NAMES + AR_NAMES + FREQ_NAMES
IMU_FEATURES = tuple(n for n in EMG_FEATURES if n not in ("MYOP", "WAMP"))

EMG_ONLY_FEATURES = ("MYOP", "WAMP")


@dataclass(frozen=True)
class WindowSpec:
    length_s: float = 0.300
    step_s: float = 0.150

    def __post_init__(self):
        if not 0 < self.step_s <= self.length_s:
            raise ValueError("need 0 < step_s <= length_s")


@dataclass(frozen=True)
class ThresholdSpec:
    zc_eps: float = 0.0
    ssc_eps: float = 0.0
    myop_thresh: float = 20.0
    wamp_thresh: float = 20.0
    hist_range_sigmas: float = 3.0
    hist_bins: int = 10
    fr_split_hz: float = 250.0
    psr_halfwidth_hz: float = 10.0

    def __post_init__(self):
        if min(self.zc_eps, self.ssc_eps, self.myop_thresh, self.wamp_thresh) < 0:
            raise ValueError("thresholds must be non-negative")


@dataclass(frozen=True)
class Window:
    placement: Placement
    kind: ChannelKind
    gesture: Gesture
    repetition: int
    start_s: float
    samples: np.ndarray


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray


# --- segmentation -------------------------------------------------------------


def window_starts(labels: LabelTrack, rate_hz: float, n_samples: int,
                  spec: WindowSpec = WindowSpec()):
    """Window provenance shared by every channel of a session.

    Returns (gesture, repetition, window_index, start_sample) int arrays.
    Windows tile each gesture segment from its onset and never cross a
    segment boundary.
    """
    wlen = int(round(spec.length_s * rate_hz))
    step = int(round(spec.step_s * rate_hz))
    g, r, w, s = [], [], [], []
    for seg in labels.gesture_segments():
        a_f = seg.start_s * rate_hz
        b_f = seg.end_s * rate_hz
        if abs(a_f - round(a_f)) > 1.0 or abs(b_f - round(b_f)) > 1.0:
            raise UnalignedLabels(
                f"segment at {seg.start_s:.4f}s is off the sample grid")
        a, b = int(round(a_f)), int(round(b_f))
        b = min(b, n_samples)
        k = 0
        while a + k * step + wlen <= b:
            g.append(int(seg.gesture))
            r.append(seg.repetition)
            w.append(k)
            s.append(a + k * step)
            k += 1
    return (np.array(g, dtype=int), np.array(r, dtype=int),
            np.array(w, dtype=int), np.array(s, dtype=int))


def segment(channel: Channel, labels: LabelTrack,
            spec: WindowSpec = WindowSpec()) -> list[Window]:
    """Cut one channel into labelled windows (see ``window_starts``)."""
    g, r, w, s = window_starts(labels, channel.rate_hz, len(channel.samples), spec)
    wlen = int(round(spec.length_s * channel.rate_hz))
    return [
        Window(channel.placement, channel.kind, Gesture(gi), int(ri),
               float(si / channel.rate_hz), channel.samples[si:si + wlen])
        for gi, ri, si in zip(g, r, s)
    ]


# --- batched kernels ----------------------------------------------------------


def _ar_coeffs_block(X: np.ndarray, order: int = 4) -> np.ndarray:
    """Yule-Walker AR fit via Levinson-Durbin, one model per row.

    Convention x[n] = sum_k a_k x[n-k] + e; rows with zero variance get
    all-zero coefficients.
    """
    m, n = X.shape
    Xc = X - X.mean(axis=1, keepdims=True)
    r = np.empty((m, order + 1))
    for k in range(order + 1):
        r[:, k] = np.einsum("ij,ij->i", Xc[:, : n - k], Xc[:, k:]) / n

    a = np.zeros((m, order))
    eps = np.finfo(float).tiny
    live = r[:, 0] > 0
    E = np.where(live, r[:, 0], 1.0)
    for k in range(1, order + 1):
        acc = r[:, k].copy()
        for j in range(1, k):
            acc -= a[:, j - 1] * r[:, k - j]
        lam = np.where(live, acc / np.maximum(E, eps), 0.0)
        prev = a[:, : k - 1].copy()
        a[:, : k - 1] = prev - lam[:, None] * prev[:, ::-1]
        a[:, k - 1] = lam
        E = E * (1.0 - lam ** 2)
        live = live & (E > 0)
    return a


def time_features_block(X: np.ndarray, th: ThresholdSpec = ThresholdSpec()) -> np.ndarray:
    """All 24 time-domain values (TIME_SCALARS + HIST + AR) per row of X."""
    X = np.asarray(X, float)
    m, n = X.shape
    d = np.diff(X, axis=1)
    absd = np.abs(d)

    mav = np.abs(X).mean(axis=1)
    var = X.var(axis=1, ddof=1)
    rms = np.sqrt((X ** 2).mean(axis=1))
    wl = absd.sum(axis=1)
    damv = wl / (n - 1)
    dasdv = np.sqrt((d ** 2).mean(axis=1))
    zc = ((X[:, :-1] * X[:, 1:] < 0) & (absd >= th.zc_eps)).sum(axis=1)
    myop = (np.abs(X) >= th.myop_thresh).mean(axis=1)
    wamp = (absd >= th.wamp_thresh).sum(axis=1)
    ssc = ((X[:, 1:-1] - X[:, :-2]) * (X[:, 1:-1] - X[:, 2:]) > th.ssc_eps).sum(axis=1)

    # histogram over mean +/- k*sigma, outliers clipped into the edge bins
    nb = th.hist_bins
    mu = X.mean(axis=1)
    sd = X.std(axis=1)
    lo = mu - th.hist_range_sigmas * sd
    width = 2 * th.hist_range_sigmas * sd
    hist = np.zeros((m, nb))
    flat = sd == 0
    if flat.any():
        hist[flat, (nb - 1) // 2] = n
    if (~flat).any():
        idx = np.floor((X[~flat] - lo[~flat, None]) / width[~flat, None] * nb)
        idx = np.clip(idx, 0, nb - 1).astype(int)
        rows = np.repeat(np.arange(idx.shape[0]), n)
        counts = np.bincount(rows * nb + idx.ravel(), minlength=idx.shape[0] * nb)
        hist[~flat] = counts.reshape(idx.shape[0], nb)

    ar = _ar_coeffs_block(X)
    return np.column_stack([mav, var, rms, wl, damv, dasdv, zc, myop, wamp, ssc,
                            hist, ar])


def periodogram_block(X: np.ndarray) -> np.ndarray:
    """One-sided energy periodogram of the zero-meaned, Hann-windowed rows.

    Scaled so the sum over bins equals the time-domain energy of the
    windowed signal (Parseval).
    """
    X = np.asarray(X, float)
    n = X.shape[1]
    w = np.hanning(n)
    xw = (X - X.mean(axis=1, keepdims=True)) * w
    spec = np.abs(np.fft.rfft(xw, axis=1)) ** 2 / n
    scale = np.full(spec.shape[1], 2.0)
    scale[0] = 1.0
    if n % 2 == 0:
        scale[-1] = 1.0
    return spec * scale


def freq_features_block(X: np.ndarray, rate_hz: float,
                        th: ThresholdSpec = ThresholdSpec()) -> np.ndarray:
    """The ten spectral descriptors per row of X."""
    P = periodogram_block(X)
    m, nb = P.shape
    f = np.fft.rfftfreq(X.shape[1], d=1.0 / rate_hz)

    sm0 = P.sum(axis=1)
    sm1 = P @ f
    sm2 = P @ f ** 2
    sm3 = P @ f ** 3
    live = sm0 > 0
    safe0 = np.where(live, sm0, 1.0)

    mnf = np.where(live, sm1 / safe0, 0.0)
    cums = np.cumsum(P, axis=1)
    mdf_idx = np.argmax(cums >= (sm0 / 2)[:, None], axis=1)
    mdf = np.where(live, f[mdf_idx], 0.0)
    pk_idx = np.argmax(P, axis=1)
    pkf = np.where(live, f[pk_idx], 0.0)

    lo_mask = f <= th.fr_split_hz
    num = P[:, lo_mask].sum(axis=1)
    den = sm0 - num
    fr = np.divide(num, den, out=np.zeros(m), where=den > 0)
    fr = np.where((den <= 0) & (num > 0), np.inf, fr)  # 0/0 stays 0 (dead window)

    half_bins = int(np.floor(th.psr_halfwidth_hz / (f[1] - f[0]) + 1e-9))
    a = np.maximum(pk_idx - half_bins, 0)
    b = np.minimum(pk_idx + half_bins + 1, nb)
    cz = np.concatenate([np.zeros((m, 1)), cums], axis=1)
    rows = np.arange(m)
    psr = np.where(live, (cz[rows, b] - cz[rows, a]) / safe0, 0.0)

    vcf = np.where(live, sm2 / safe0 - (sm1 / safe0) ** 2, 0.0)
    return np.column_stack([mnf, mdf, pkf, sm0, sm1, sm2, sm3, fr, psr, vcf])


# --- single-window wrappers ---------------------------------------------------


def time_features(w: Window, th: ThresholdSpec = ThresholdSpec()) -> FeatureVector:
    vals = time_features_block(w.samples[None, :], th)[0]
    return FeatureVector(TIME_SCALARS + HIST_NAMES + AR_NAMES, vals)


def freq_features(w: Window, rate_hz: float,
                  th: ThresholdSpec = ThresholdSpec()) -> FeatureVector:
    if len(w.samples) < 8:
        raise ValueError("window too short for spectral features")
    vals = freq_features_block(w.samples[None, :], rate_hz, th)[0]
    return FeatureVector(FREQ_NAMES, vals)


# --- feature matrix -----------------------------------------------------------


@dataclass(frozen=True)
class FeatureMatrix:
    """Windows x features table with full row and column provenance."""

    data: np.ndarray
    col_placement: tuple[str, ...]
    col_kind: tuple[str, ...]
    col_feature: tuple[str, ...]
    gesture: np.ndarray
    repetition: np.ndarray
    window_index: np.ndarray
    start_s: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]

    def col_names(self) -> list[str]:
        return [f"{p}:{k}:{f}" for p, k, f in
                zip(self.col_placement, self.col_kind, self.col_feature)]

    def select_columns(self, placements=None, modalities=None) -> "FeatureMatrix":
        """Column subset by placement names and/or modalities."""
        pset = {p.value if isinstance(p, Placement) else str(p) for p in placements} \
            if placements is not None else None
        mset = {m if isinstance(m, Modality) else Modality(m) for m in modalities} \
            if modalities is not None else None
        keep = []
        for j, (p, k) in enumerate(zip(self.col_placement, self.col_kind)):
            if pset is not None and p not in pset:
                continue
            if mset is not None and ChannelKind(k).modality not in mset:
                continue
            keep.append(j)
        if not keep:
            raise EmptySelection("no columns match the requested placements/modalities")
        idx = np.array(keep)
        return FeatureMatrix(
            data=self.data[:, idx],
            col_placement=tuple(self.col_placement[j] for j in keep),
            col_kind=tuple(self.col_kind[j] for j in keep),
            col_feature=tuple(self.col_feature[j] for j in keep),
            gesture=self.gesture, repetition=self.repetition,
            window_index=self.window_index, start_s=self.start_s,
        )

    def to_csv(self, path):
        header = ["gesture", "repetition", "window_index"] + self.col_names()
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(self.n_rows):
                lead = f"{self.gesture[i]},{self.repetition[i]},{self.window_index[i]}"
                fh.write(lead + "," + ",".join(repr(v) for v in self.data[i].tolist()) + "\n")

    def to_npz(self, path, compress: bool = False):
        save = np.savez_compressed if compress else np.savez
        save(path, format_version=1, data=self.data,
             col_placement=np.array(self.col_placement),
             col_kind=np.array(self.col_kind),
             col_feature=np.array(self.col_feature),
             gesture=self.gesture, repetition=self.repetition,
             window_index=self.window_index, start_s=self.start_s)

    @classmethod
    def from_npz(cls, path) -> "FeatureMatrix":
        z = np.load(path, allow_pickle=False)
        if int(z["format_version"]) != 1:
            raise ValueError(f"unsupported feature cache version {z['format_version']}")
        return cls(
            data=z["data"],
            col_placement=tuple(z["col_placement"].tolist()),
            col_kind=tuple(z["col_kind"].tolist()),
            col_feature=tuple(z["col_feature"].tolist()),
            gesture=z["gesture"], repetition=z["repetition"],
            window_index=z["window_index"], start_s=z["start_s"])


def extract_matrix(rec: Recording, labels: LabelTrack,
                   wspec: WindowSpec = WindowSpec(),
                   th: ThresholdSpec = ThresholdSpec(),
                   channel_filter: set[tuple[Placement, Modality]] | None = None,
                   ) -> FeatureMatrix:
    """Extract the full windows x features matrix for a preprocessed session.

    ``channel_filter`` restricts to (placement, modality) pairs; None keeps
    every channel.  Columns are ordered by placement, then channel kind,
    then the canonical feature order; rows are the windows every selected
    channel shares.
    """
    if channel_filter is not None and len(channel_filter) == 0:
        raise EmptySelection("empty channel filter")
    chans = []
    for ch in rec.channels:
        if channel_filter is None or (ch.placement, ch.kind.modality) in channel_filter:
            chans.append(ch)
    if not chans:
        raise EmptySelection("no channels match the filter")
    rates = {ch.rate_hz for ch in chans}
    if len(rates) != 1:
        raise ValueError("channels must share one rate; preprocess first")
    rate = rates.pop()

    order = {p: i for i, p in enumerate(Placement)}
    korder = {k: i for i, k in enumerate(ChannelKind)}
    chans.sort(key=lambda c: (order[c.placement], korder[c.kind]))

    n_common = min(len(ch.samples) for ch in chans)
    g, r, w, starts = window_starts(labels, rate, n_common, wspec)
    wlen = int(round(wspec.length_s * rate))
    gather = starts[:, None] + np.arange(wlen)

    blocks, placements, kinds, feats = [], [], [], []
    for ch in chans:
        X = ch.samples[gather]
        tvals = time_features_block(X, th)
        fvals = freq_features_block(X, rate, th)
        block = np.column_stack([tvals, fvals])
        names = EMG_FEATURES
        if ch.kind is not ChannelKind.EMG:
            keep = [i for i, nm in enumerate(EMG_FEATURES) if nm not in EMG_ONLY_FEATURES]
            block = block[:, keep]
            names = IMU_FEATURES
        blocks.append(block)
        placements.extend([ch.placement.value] * len(names))
        kinds.extend([ch.kind.value] * len(names))
        feats.extend(names)

    return FeatureMatrix(
        data=np.column_stack(blocks) if blocks else np.empty((0, 0)),
        col_placement=tuple(placements), col_kind=tuple(kinds),
        col_feature=tuple(feats),
        gesture=g, repetition=r, window_index=w, start_s=starts / rate)
