"""Neural-collapse geometry metrics for a feature/classifier snapshot.

Given last-layer features grouped by class and the classifier matrix,
compute:

* NC1: within-class scatter relative to between-class scatter,
  trace(Sigma_W @ pinv(Sigma_B)) / C;
* NC2: Frobenius distance between the normalized classifier Gram W W^T
  and the normalized simplex-ETF Gram;
* NC3: the same distance for W M, where M stacks the centered class
  means (classifier/mean self-duality);
* NC4 agreement: fraction of samples whose classifier prediction matches
  the nearest-class-mean prediction;
* rho: the class-wise loss imbalance coefficient of supplied per-class
  average losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import frobenius_norm, pinv, trace
from .reweighting import loss_imbalance_rho

__all__ = [
    "FeatureBank",
    "NcReport",
    "etf_gram_target",
    "class_means",
    "covariances",
    "nc1",
    "nc2",
    "nc3",
    "nc4_agreement",
    "make_report",
]


@dataclass(frozen=True)
class FeatureBank:
    """Per-class collections of p-dimensional feature vectors."""

    class_ids: tuple[int, ...]
    features: tuple[np.ndarray, ...]  # one (n_c, p) block per class id

    def __post_init__(self):
        if len(self.class_ids) != len(self.features) or not self.class_ids:
            raise ValueError("need one non-empty feature block per class id")
        if any(b >= a for a, b in zip(self.class_ids[1:], self.class_ids)):
            raise ValueError("class ids must be strictly increasing")
        dims = set()
        for block in self.features:
            if block.ndim != 2 or block.shape[0] == 0:
                raise ValueError("each class needs a non-empty (n, p) feature block")
            dims.add(block.shape[1])
        if len(dims) != 1:
            raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")

    @classmethod
    def from_labels(cls, features, labels) -> "FeatureBank":
        x = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels)
        ids = tuple(int(c) for c in np.unique(y))
        return cls(class_ids=ids, features=tuple(x[y == c] for c in ids))

    @property
    def class_count(self) -> int:
        return len(self.class_ids)

    @property
    def feature_dim(self) -> int:
        return self.features[0].shape[1]


@dataclass(frozen=True)
class NcReport:
    """One epoch's collapse metrics."""

    epoch: int
    nc1: float
    nc2: float
    nc3: float
    nc4_agreement: float
    rho: float

    def __post_init__(self):
        vals = (self.nc1, self.nc2, self.nc3, self.nc4_agreement, self.rho)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("metric values must be finite")


def etf_gram_target(class_count: int) -> np.ndarray:
    """(I - ones/C) / sqrt(C - 1), the normalized simplex-ETF Gram."""
    c = class_count
    if c < 2:
        raise ValueError("need at least 2 classes")
    return (np.eye(c) - np.full((c, c), 1.0 / c)) / np.sqrt(c - 1.0)


def class_means(bank: FeatureBank):
    """Per-class feature means and their unweighted average (global mean)."""
    means = np.stack([block.mean(axis=0) for block in bank.features])
    return means, means.mean(axis=0)


def covariances(bank: FeatureBank):
    """Within-class scatter Sigma_W (averaged over all samples) and
    between-class scatter Sigma_B of the centered class means."""
    means, global_mean = class_means(bank)
    p = bank.feature_dim
    sigma_w = np.zeros((p, p))
    total = 0
    for block, mu in zip(bank.features, means):
        centered = block - mu
        sigma_w += centered.T @ centered
        total += block.shape[0]
    sigma_w /= total
    centered_means = means - global_mean
    sigma_b = centered_means.T @ centered_means / bank.class_count
    return sigma_w, sigma_b


def nc1(bank: FeatureBank, rank_tol: float | None = None) -> float:
    """trace(Sigma_W @ pinv(Sigma_B)) / C."""
    sigma_w, sigma_b = covariances(bank)
    return trace(sigma_w @ pinv(sigma_b, rank_tol)) / bank.class_count


def _normalized_gram_distance(gram: np.ndarray, class_count: int, what: str) -> float:
    norm = frobenius_norm(gram)
    if norm == 0.0:
        raise ValueError(f"{what} is the zero matrix; metric undefined")
    return frobenius_norm(gram / norm - etf_gram_target(class_count))


def nc2(classifier) -> float:
    """Distance of the normalized W W^T from the simplex-ETF Gram."""
    w = np.asarray(classifier, dtype=np.float64)
    return _normalized_gram_distance(w @ w.T, w.shape[0], "W W^T")


def nc3(classifier, bank: FeatureBank) -> float:
    """Distance of the normalized W M from the simplex-ETF Gram, where M
    stacks the centered class means column-wise."""
    w = np.asarray(classifier, dtype=np.float64)
    means, global_mean = class_means(bank)
    m_dot = (means - global_mean).T  # (p, C)
    if w.shape[1] != m_dot.shape[0]:
        raise ValueError(f"classifier dim {w.shape[1]} != feature dim {m_dot.shape[0]}")
    return _normalized_gram_distance(w @ m_dot, bank.class_count, "W M")


def nc4_agreement(classifier, bias, bank: FeatureBank) -> float:
    """Fraction of samples where the classifier argmax equals the
    nearest-class-mean argmin. Ties resolve to the lowest class id on
    both sides."""
    w = np.asarray(classifier, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    means, _ = class_means(bank)
    ids = np.asarray(bank.class_ids)
    agree = 0
    total = 0
    for block in bank.features:
        logits = block @ w.T + b
        pred = np.argmax(logits, axis=1)  # first max = lowest class id
        d2 = ((block[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        nearest = ids[np.argmin(d2, axis=1)]
        agree += int((pred == nearest).sum())
        total += block.shape[0]
    return agree / total


def make_report(classifier, bias, bank: FeatureBank, per_class_losses, epoch: int) -> NcReport:
    """Assemble all metrics for one snapshot."""
    return NcReport(
        epoch=epoch,
        nc1=nc1(bank),
        nc2=nc2(classifier),
        nc3=nc3(classifier, bank),
        nc4_agreement=nc4_agreement(classifier, bias, bank),
        rho=loss_imbalance_rho(per_class_losses),
    )
