"""Classifiers and evaluation: shrinkage LDA, one-vs-one soft-margin SVM
solved by SMO, leave-one-repetition-out cross-validation with nested grid
search, and the Davies-Bouldin index.

Feature standardization is always fitted on training rows only: the CV
harness owns it for LDA, the SVM model carries its own scaler.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    ClassTooSmall,
    CoincidentCentroids,
    MissingRepetition,
    NonConvergence,
    SchemaMismatch,
    SingularCovariance,
)
from .features import FeatureMatrix


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0, ddof=0)
        std = np.where(std == 0, 1.0, std)
        return cls(mean, std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


# --- LDA -----------------------------------------------------------------------


@dataclass(frozen=True)
class LdaModel:
    classes: np.ndarray
    class_means: np.ndarray      # (k, p)
    pooled_cov: np.ndarray       # after shrinkage
    coef: np.ndarray             # (p, k): discriminant weights
    intercept: np.ndarray        # (k,)
    shrinkage: float
    tol: float
    priors: np.ndarray
    n_features: int


def lda_fit(X, y, shrinkage: float = 0.0, tol: float = 1e-4,
            priors=None) -> LdaModel:
    """Fit a shrinkage LDA on (already standardized) features.

    The pooled within-class covariance is shrunk toward its scaled
    identity: (1-s)*S + s*(tr(S)/p)*I.  The discriminant solve uses a
    Cholesky factorization when shrinkage makes the matrix positive
    definite; otherwise (always at shrinkage 0) a spectral solve that
    drops eigenvalues at or below ``tol``.
    """
    X = np.asarray(X, float)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ClassTooSmall("need at least 2 classes")
    if counts.min() < 2:
        raise ClassTooSmall("every class needs at least 2 rows")
    n, p = X.shape
    k = len(classes)
    if priors is None:
        priors = np.full(k, 1.0 / k)
    else:
        priors = np.asarray(priors, float)

    means = np.vstack([X[y == c].mean(axis=0) for c in classes])
    idx = np.searchsorted(classes, y)
    Xc = X - means[idx]
    cov = (Xc.T @ Xc) / (n - k)
    if shrinkage > 0:
        mu = np.trace(cov) / p
        cov = (1.0 - shrinkage) * cov
        cov[np.diag_indices(p)] += shrinkage * mu

    W = None
    if shrinkage > 0:
        try:
            c_factor = sla.cho_factor(cov, check_finite=False)
            W = sla.cho_solve(c_factor, means.T, check_finite=False)
        except np.linalg.LinAlgError:
            W = None
    if W is None:
        evals, evecs = sla.eigh(cov, check_finite=False)
        keep = evals > tol
        if not keep.any():
            raise SingularCovariance(
                "covariance has no eigenvalue above tol; cannot discriminate")
        inv = evecs[:, keep] / evals[keep]
        W = inv @ (evecs[:, keep].T @ means.T)

    intercept = -0.5 * np.einsum("kp,pk->k", means, W) + np.log(priors)
    return LdaModel(classes=classes, class_means=means, pooled_cov=cov,
                    coef=W, intercept=intercept, shrinkage=shrinkage, tol=tol,
                    priors=priors, n_features=p)


def lda_predict(model: LdaModel, X) -> np.ndarray:
    """argmax of the linear discriminants; ties go to the lowest class id."""
    X = np.asarray(X, float)
    if X.shape[1] != model.n_features:
        raise SchemaMismatch(
            f"model expects {model.n_features} features, got {X.shape[1]}")
    scores = X @ model.coef + model.intercept
    return model.classes[np.argmax(scores, axis=1)]


# --- SVM (one-vs-one SMO) --------------------------------------------------------


def _kernel(kind: str, gamma: float):
    if kind == "linear":
        return lambda A, B: A @ B.T
    if kind == "rbf":
        def rbf(A, B):
            sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2 * A @ B.T
            return np.exp(-gamma * np.maximum(sq, 0))
        return rbf
    raise ValueError(f"unknown kernel {kind!r}")


def _smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float,
               max_iter: int | None = None):
    """Two-variable SMO with maximal-violating-pair selection.

    Solves min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0 with Q = yy'K.
    Returns (alpha, bias).
    """
    l = len(y)
    if max_iter is None:
        max_iter = max(20_000, 500 * l)
    alpha = np.zeros(l)
    g = np.zeros(l)              # g_i = sum_k alpha_k y_k K_ik
    for it in range(max_iter):
        yg = y * g
        up = ((y > 0) & (alpha < C - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y < 0) & (alpha < C - 1e-12)) | ((y > 0) & (alpha > 1e-12))
        # violation measure: max over up of y(1 - yg) ... expressed as -y*grad
        crit = y * (1.0 - yg)    # = -y_i * grad_i
        m_up = np.where(up, crit, -np.inf)
        m_low = np.where(low, crit, np.inf)
        i = int(np.argmax(m_up))
        j = int(np.argmin(m_low))
        if m_up[i] - m_low[j] <= tol:
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        eta = max(eta, 1e-12)
        # errors without bias; the bias cancels in the difference
        e_i = g[i] - y[i]
        e_j = g[j] - y[j]
        s = y[i] * y[j]
        if s > 0:
            lo_b = max(0.0, alpha[i] + alpha[j] - C)
            hi_b = min(C, alpha[i] + alpha[j])
        else:
            lo_b = max(0.0, alpha[j] - alpha[i])
            hi_b = min(C, C + alpha[j] - alpha[i])
        aj_new = alpha[j] + y[j] * (e_i - e_j) / eta
        aj_new = min(max(aj_new, lo_b), hi_b)
        ai_new = alpha[i] + s * (alpha[j] - aj_new)
        d_i, d_j = ai_new - alpha[i], aj_new - alpha[j]
        if abs(d_j) < 1e-15 and abs(d_i) < 1e-15:
            break
        alpha[i], alpha[j] = ai_new, aj_new
        g += d_i * y[i] * K[:, i] + d_j * y[j] * K[:, j]
    else:
        raise NonConvergence(f"SMO hit the {max_iter}-iteration cap")

    free = (alpha > 1e-9) & (alpha < C - 1e-9)
    if free.any():
        bias = float(np.mean(y[free] - g[free]))
    else:
        yg = y * g
        crit = y * (1.0 - yg)
        up = ((y > 0) & (alpha < C - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y < 0) & (alpha < C - 1e-12)) | ((y > 0) & (alpha > 1e-12))
        hi = np.where(up, crit, -np.inf).max()
        lo = np.where(low, crit, np.inf).min()
        bias = float((hi + lo) / 2) if np.isfinite(hi) and np.isfinite(lo) else 0.0
    return alpha, bias


@dataclass(frozen=True)
class BinaryMachine:
    class_pos: int               # the smaller class id; decision >= 0 votes for it
    class_neg: int
    sv: np.ndarray
    coef: np.ndarray             # alpha_i * y_i at the support vectors
    alpha: np.ndarray
    y: np.ndarray
    bias: float

    def decision(self, K_sv: np.ndarray) -> np.ndarray:
        return K_sv @ self.coef + self.bias


@dataclass(frozen=True)
class SvmModel:
    classes: np.ndarray
    kernel: str
    gamma: float
    C: float
    tol: float
    scaler: Standardizer
    machines: tuple[BinaryMachine, ...]
    n_features: int

    def kkt_violation(self) -> float:
        """Worst KKT slack over all binary machines (0 = perfectly optimal)."""
        kern = _kernel(self.kernel, self.gamma)
        worst = 0.0
        for m in self.machines:
            f = kern(m.sv, m.sv) @ m.coef + m.bias
            margin = m.y * f
            v = np.zeros_like(margin)
            at_zero = m.alpha <= 1e-9
            at_c = m.alpha >= self.C - 1e-9
            free = ~at_zero & ~at_c
            v[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
            v[at_c] = np.maximum(0.0, margin[at_c] - 1.0)
            v[free] = np.abs(margin[free] - 1.0)
            if len(v):
                worst = max(worst, float(v.max()))
        return worst


def svm_fit(X, y, kernel: str = "rbf", C: float = 1.0, gamma: float | None = None,
            tol: float = 1e-3) -> SvmModel:
    """One-vs-one soft-margin SVM; standardization is fitted here on the
    training rows and baked into the model.

    gamma defaults to 1 / (n_features * var(X_standardized)) for the rbf
    kernel.
    """
    X = np.asarray(X, float)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ClassTooSmall("need at least 2 classes")
    if counts.min() < 2:
        raise ClassTooSmall("every class needs at least 2 rows")
    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    if gamma is None:
        v = Xs.var()
        gamma = 1.0 / (X.shape[1] * v) if v > 0 else 1.0 / X.shape[1]
    kern = _kernel(kernel, gamma)

    machines = []
    for a, b in itertools.combinations(classes, 2):
        rows = (y == a) | (y == b)
        Xa = Xs[rows]
        ya = np.where(y[rows] == a, 1.0, -1.0)
        K = kern(Xa, Xa)
        alpha, bias = _smo_solve(K, ya, C, tol)
        sv_mask = alpha > 1e-9
        machines.append(BinaryMachine(
            class_pos=int(a), class_neg=int(b),
            sv=Xa[sv_mask], coef=(alpha * ya)[sv_mask],
            alpha=alpha[sv_mask], y=ya[sv_mask], bias=bias))
    return SvmModel(classes=classes, kernel=kernel, gamma=float(gamma), C=C,
                    tol=tol, scaler=scaler, machines=tuple(machines),
                    n_features=X.shape[1])


def svm_decision_values(model: SvmModel, X) -> np.ndarray:
    """Per-pair decision values, columns in machine order."""
    X = np.asarray(X, float)
    if X.shape[1] != model.n_features:
        raise SchemaMismatch(
            f"model expects {model.n_features} features, got {X.shape[1]}")
    Xs = model.scaler.transform(X)
    kern = _kernel(model.kernel, model.gamma)
    cols = [m.decision(kern(Xs, m.sv)) if len(m.sv) else np.full(len(Xs), m.bias)
            for m in model.machines]
    return np.column_stack(cols)


def svm_predict(model: SvmModel, X) -> np.ndarray:
    """Majority vote over the one-vs-one machines; ties to the lowest id."""
    dec = svm_decision_values(model, np.asarray(X, float))
    class_index = {int(c): i for i, c in enumerate(model.classes)}
    votes = np.zeros((dec.shape[0], len(model.classes)), dtype=int)
    for col, m in enumerate(model.machines):
        pos = dec[:, col] >= 0
        votes[pos, class_index[m.class_pos]] += 1
        votes[~pos, class_index[m.class_neg]] += 1
    return model.classes[np.argmax(votes, axis=1)]


# --- Davies-Bouldin ---------------------------------------------------------------


def davies_bouldin(X, y) -> float:
    """Mean over classes of the worst (S_i + S_j) / M_ij ratio."""
    X = np.asarray(X, float)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    cents = np.vstack([X[y == c].mean(axis=0) for c in classes])
    scatter = np.array([
        np.linalg.norm(X[y == c] - cents[i], axis=1).mean()
        for i, c in enumerate(classes)])
    diff = cents[:, None, :] - cents[None, :, :]
    m = np.linalg.norm(diff, axis=2)
    off = ~np.eye(len(classes), dtype=bool)
    if np.any(m[off] == 0):
        raise CoincidentCentroids("two classes share a centroid")
    ratio = (scatter[:, None] + scatter[None, :]) / np.where(off, m, np.inf)
    return float(np.max(np.where(off, ratio, -np.inf), axis=1).mean())


# --- cross-validation ---------------------------------------------------------------


@dataclass(frozen=True)
class CvPlan:
    folds: int = 4


DEFAULT_GRIDS = {
    "lda": {"shrinkage": [0.0, 0.1, 0.3, 0.5, 1.0], "tol": [1e-4, 1e-2]},
    "svm": {"C": [0.1, 1.0, 10.0, 100.0], "kernel": ["linear", "rbf"]},
}


@dataclass(frozen=True)
class EvalResult:
    model_family: str
    classes: tuple[int, ...]
    fold_accuracies: tuple[float, ...]
    mean_accuracy: float
    confusion: np.ndarray
    best_params: tuple[dict, ...]       # per fold
    dbi: float
    fold_models: tuple = ()

    def confusion_row_normalized(self) -> np.ndarray:
        sums = self.confusion.sum(axis=1, keepdims=True)
        return self.confusion / np.where(sums == 0, 1, sums)

    def to_json(self, path):
        payload = {
            "model_family": self.model_family,
            "classes": list(self.classes),
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "best_params": list(self.best_params),
            "dbi": self.dbi,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)

    def confusion_to_csv(self, path, names=None):
        labels = [names[c] if names else str(c) for c in self.classes]
        with open(path, "w") as fh:
            fh.write("true\\pred," + ",".join(labels) + "\n")
            for i, lab in enumerate(labels):
                fh.write(lab + "," + ",".join(str(int(v)) for v in self.confusion[i]) + "\n")


def _expand_grid(grid: dict) -> list[dict]:
    keys = list(grid)
    return [dict(zip(keys, combo))
            for combo in itertools.product(*(grid[k] for k in keys))]


def _fit_and_score(family, params, X_train, y_train, X_test, y_test):
    if family == "lda":
        scaler = Standardizer.fit(X_train)
        model = lda_fit(scaler.transform(X_train), y_train,
                        shrinkage=params.get("shrinkage", 0.0),
                        tol=params.get("tol", 1e-4))
        pred = lda_predict(model, scaler.transform(X_test))
        fitted = (scaler, model)
    elif family == "svm":
        model = svm_fit(X_train, y_train,
                        kernel=params.get("kernel", "rbf"),
                        C=params.get("C", 1.0),
                        gamma=params.get("gamma"))
        pred = svm_predict(model, X_test)
        fitted = model
    else:
        raise ValueError(f"unknown model family {family!r}")
    return fitted, pred, float((pred == y_test).mean())


def cv_evaluate(fm: FeatureMatrix, plan: CvPlan = CvPlan(),
                model_family: str = "lda", grid: dict | None = None,
                keep_models: bool = False) -> EvalResult:
    """Leave-one-repetition-out cross-validation with nested grid search.

    Each fold holds out one repetition index as the test set.  When the
    grid has more than one point, the winner is picked per fold by an
    inner leave-one-repetition-out pass over the training repetitions
    only, then refit on the full training fold.  Standardization is
    always refit on whatever rows the enclosed fit sees.
    """
    if grid is None:
        grid = DEFAULT_GRIDS[model_family]
    points = _expand_grid(grid)
    X = fm.data
    y = fm.gesture
    reps = fm.repetition
    rep_ids = np.unique(reps)
    if len(rep_ids) != plan.folds:
        raise MissingRepetition(
            f"expected {plan.folds} repetition indices, found {len(rep_ids)}")
    for g in np.unique(y):
        for rep in rep_ids:
            if not np.any((y == g) & (reps == rep)):
                raise MissingRepetition(f"gesture {g} missing repetition {rep}")

    classes = np.unique(y)
    class_index = {int(c): i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    fold_accs, fold_params, fold_models = [], [], []

    for test_rep in rep_ids:
        test_mask = reps == test_rep
        train_mask = ~test_mask
        X_tr, y_tr, r_tr = X[train_mask], y[train_mask], reps[train_mask]

        if len(points) == 1:
            best = points[0]
        else:
            inner_reps = np.unique(r_tr)
            scores = []
            for params in points:
                accs = []
                for hold in inner_reps:
                    m_in = r_tr != hold
                    _, _, acc = _fit_and_score(
                        model_family, params,
                        X_tr[m_in], y_tr[m_in], X_tr[~m_in], y_tr[~m_in])
                    accs.append(acc)
                scores.append(float(np.mean(accs)))
            best = points[int(np.argmax(scores))]

        fitted, pred, acc = _fit_and_score(
            model_family, best, X_tr, y_tr, X[test_mask], y[test_mask])
        fold_accs.append(acc)
        fold_params.append(best)
        if keep_models:
            fold_models.append(fitted)
        for t, p_ in zip(y[test_mask], pred):
            confusion[class_index[int(t)], class_index[int(p_)]] += 1

    dbi = davies_bouldin(Standardizer.fit(X).transform(X), y)
    return EvalResult(
        model_family=model_family,
        classes=tuple(int(c) for c in classes),
        fold_accuracies=tuple(fold_accs),
        mean_accuracy=float(np.mean(fold_accs)),
        confusion=confusion,
        best_params=tuple(fold_params),
        dbi=dbi,
        fold_models=tuple(fold_models))
