"""Margin moments and C-bounds for majority-vote classifiers, including the
corrections for class-conditional label noise.

The margin of a vote row v for class y is v[y] minus the best competing
vote max_{c != y} v[c]. First and second margin moments are taken under a
per-row class weighting W (posterior estimates, or one-hot labels). The
plain C-bound reads 1 - mu1^2 / mu2 when mu1 > 0. Under label noise
described by a column-stochastic confusion matrix p, two correction
factors scale the Gibbs-risk term: beta, the largest row sum of p, and
gamma, the sum of columnwise maxima. Both equal one for the identity
matrix and gamma is never below beta.
"""

from dataclasses import dataclass

import numpy as np

_ATOL = 1e-6


@dataclass(frozen=True)
class MarginMoments:
    """First and second moments of the weighted margin distribution."""

    mu1: float
    mu2: float
    sample_count: int

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        if not -1.0 - _ATOL <= self.mu1 <= 1.0 + _ATOL:
            raise ValueError("first margin moment outside [-1, 1]")
        if not 0.0 - _ATOL <= self.mu2 <= 1.0 + _ATOL:
            raise ValueError("second margin moment outside [0, 1]")
        if self.mu2 + 1e-12 < self.mu1 ** 2:
            raise ValueError("second moment below squared first moment")


@dataclass(frozen=True)
class BoundValue:
    """A risk bound in [0, 1]; ``vacuous`` marks the trivial value one."""

    value: float
    vacuous: bool


def margins(V: np.ndarray) -> np.ndarray:
    """Margin of every vote row for every class.

    M[x, c] = V[x, c] - max_{c' != c} V[x, c']. With duplicated maxima the
    competing maximum equals the maximum itself, so those margins are zero.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] < 2:
        raise ValueError("vote matrix must have at least two class columns")
    part = np.partition(V, V.shape[1] - 2, axis=1)
    top, second = part[:, -1:], part[:, -2:-1]
    return V - np.where(V == top, second, top)


def _check_votes(V: np.ndarray) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] < 2:
        raise ValueError("vote matrix must have at least two class columns")
    if np.any(V < -_ATOL) or np.any(np.abs(V.sum(axis=1) - 1.0) > _ATOL):
        raise ValueError("vote rows must be probability vectors")
    return V


def margin(v: np.ndarray, y: int) -> float:
    """Margin of a single vote vector for class y (labels are 1-based)."""
    v = _check_votes(np.asarray(v, dtype=np.float64)[None, :])[0]
    if not 1 <= y <= v.shape[0]:
        raise ValueError(f"class {y} out of range 1..{v.shape[0]}")
    return float(margins(v[None, :])[0, y - 1])


def margin_moments(V: np.ndarray, W: np.ndarray | None = None) -> MarginMoments:
    """Weighted first and second margin moments over a sample.

    W holds one probability row per example: exact class posteriors when
    known, or the votes themselves as their approximation. ``None`` means
    W = V, the convention used for fitness evaluation.
    """
    V = _check_votes(V)
    n, K = V.shape
    if W is None:
        W = V
    else:
        W = np.asarray(W, dtype=np.float64)
        if W.shape != V.shape:
            raise ValueError("weight matrix must match the vote matrix shape")
        if np.any(W < -_ATOL) or np.any(np.abs(W.sum(axis=1) - 1.0) > _ATOL):
            raise ValueError("weight rows must be probability vectors")
    M = margins(V)
    mu1 = float(np.mean(np.sum(W * M, axis=1)))
    mu2 = float(np.mean(np.sum(W * M * M, axis=1)))
    return MarginMoments(mu1=mu1, mu2=mu2, sample_count=n)


def one_hot(y: np.ndarray, class_count: int) -> np.ndarray:
    """Encode labels 1..K as rows of the identity, for use as moment weights."""
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 1 or y.max() > class_count):
        raise ValueError("labels out of range for one-hot encoding")
    W = np.zeros((y.shape[0], class_count))
    W[np.arange(y.shape[0]), y - 1] = 1.0
    return W


def _bounded(raw: float) -> BoundValue:
    return BoundValue(value=float(min(1.0, max(0.0, raw))), vacuous=False)


def cbound(moments: MarginMoments) -> BoundValue:
    """Majority-vote risk bound 1 - mu1^2 / mu2.

    Valid only when the mean margin is positive; otherwise the bound is
    vacuous and reported as one.
    """
    if moments.mu1 <= 0 or moments.mu2 <= 0:
        return BoundValue(value=1.0, vacuous=True)
    return _bounded(1.0 - moments.mu1 ** 2 / moments.mu2)


def cbound_il(moments: MarginMoments, gamma_value: float) -> BoundValue:
    """C-bound corrected for label noise via the columnwise-maxima factor.

    The Gibbs term mu1^2 / mu2 shrinks by the factor gamma >= 1 computed
    from the confusion matrix, so the bound is never tighter than the
    noise-free one.
    """
    if gamma_value <= 0:
        raise ValueError("gamma must be positive")
    if moments.mu1 <= 0 or moments.mu2 <= 0:
        return BoundValue(value=1.0, vacuous=True)
    return _bounded(1.0 - moments.mu1 ** 2 / (moments.mu2 * gamma_value))


def cbound_beta(moments: MarginMoments, beta_value: float) -> BoundValue:
    """C-bound corrected with the row-sum factor beta (tighter than gamma)."""
    if beta_value <= 0:
        raise ValueError("beta must be positive")
    if moments.mu1 <= 0 or moments.mu2 <= 0:
        return BoundValue(value=1.0, vacuous=True)
    return _bounded(1.0 - moments.mu1 ** 2 / (moments.mu2 * beta_value))


@dataclass(frozen=True)
class MislabelingMatrix:
    """Column-stochastic confusion matrix; p[i, j] = P(observed i+1 | true j+1)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("mislabeling matrix must be square")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=0) - 1.0) > 1e-9):
            raise ValueError("mislabeling matrix columns must sum to one")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def class_count(self) -> int:
        return self.p.shape[0]


def beta(matrix) -> float:
    """Largest row sum of the confusion matrix. Equals 1 at the identity."""
    p = matrix.p if isinstance(matrix, MislabelingMatrix) else MislabelingMatrix(np.asarray(matrix)).p
    return float(p.sum(axis=1).max())


def gamma(matrix) -> float:
    """Sum of columnwise maxima. Ranges from 1 up to the class count, never below beta."""
    p = matrix.p if isinstance(matrix, MislabelingMatrix) else MislabelingMatrix(np.asarray(matrix)).p
    return float(p.max(axis=0).sum())


def estimate_mislabeling(
    true_labels: np.ndarray,
    predicted: np.ndarray,
    class_count: int,
    smoothing: float = 1.0,
    mask: np.ndarray | None = None,
) -> MislabelingMatrix:
    """Estimate the confusion matrix from reference labels and predictions.

    Column j is the smoothed empirical distribution of predictions among
    rows whose reference label is j+1: (count + smoothing) over
    (column total + K * smoothing). A class absent from the (optionally
    masked) rows gets a uniform column.
    """
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if true_labels.shape != predicted.shape:
        raise ValueError("label arrays must have the same shape")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        true_labels = true_labels[mask]
        predicted = predicted[mask]
    if true_labels.size == 0:
        raise ValueError("cannot estimate a mislabeling matrix from zero rows")
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    K = int(class_count)
    for name, arr in (("true_labels", true_labels), ("predicted", predicted)):
        if arr.min() < 1 or arr.max() > K:
            raise ValueError(f"{name} outside 1..{K}")
    flat = (predicted - 1) * K + (true_labels - 1)
    counts = np.bincount(flat, minlength=K * K).reshape(K, K).astype(np.float64)
    totals = counts.sum(axis=0)
    p = np.empty((K, K))
    for j in range(K):
        denom = totals[j] + K * smoothing
        if denom <= 0:
            p[:, j] = 1.0 / K
        else:
            p[:, j] = (counts[:, j] + smoothing) / denom
    return MislabelingMatrix(p)
