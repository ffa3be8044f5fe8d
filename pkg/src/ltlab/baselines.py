"""Reference reweighting losses used as comparison arms.

Class-weight schemes (inverse frequency, inverse square root,
class-balanced effective numbers) produce static per-class multipliers;
focal and influence-balanced losses reshape individual sample losses;
range loss is a batch-level feature-geometry regularizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ClassCounts",
    "inv_freq_weights",
    "inv_sqrt_weights",
    "cb_weights",
    "focal_loss",
    "ib_loss",
    "ib_class_coefficients",
    "range_loss",
    "range_loss_grad",
]

# Pairwise distances below this are floored before the harmonic mean in
# range_loss, keeping the intra term finite when features coincide.
RANGE_DIST_FLOOR = 1e-12


@dataclass(frozen=True)
class ClassCounts:
    """Per-class sample counts n_c (each >= 1) with their total N."""

    per_class: tuple[int, ...]
    total: int = field(init=False)

    def __post_init__(self):
        counts = tuple(int(n) for n in self.per_class)
        if not counts:
            raise ValueError("need at least one class")
        if any(n < 1 for n in counts):
            raise ValueError("every class count must be >= 1")
        object.__setattr__(self, "per_class", counts)
        object.__setattr__(self, "total", sum(counts))

    @classmethod
    def from_labels(cls, labels, class_count: int) -> "ClassCounts":
        counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=class_count)
        return cls(per_class=tuple(int(n) for n in counts))

    def __len__(self) -> int:
        return len(self.per_class)


def _counts_array(counts: ClassCounts) -> np.ndarray:
    return np.asarray(counts.per_class, dtype=np.float64)


def inv_freq_weights(counts: ClassCounts) -> np.ndarray:
    """w_c = 1 / n_c."""
    return 1.0 / _counts_array(counts)


def inv_sqrt_weights(counts: ClassCounts) -> np.ndarray:
    """w_c = 1 / sqrt(n_c)."""
    return 1.0 / np.sqrt(_counts_array(counts))


def cb_weights(counts: ClassCounts, beta: float) -> np.ndarray:
    """Class-balanced weights w_c = (1 - beta) / (1 - beta^n_c).

    beta = 0 gives all ones; beta -> 1 approaches inverse frequency up to
    a constant factor.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if beta == 0.0:
        return np.ones(len(counts))
    n = _counts_array(counts)
    return (1.0 - beta) / (1.0 - beta ** n)


def _check_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("probability vector must be 1-D")
    if (p < 0).any() or (p > 1).any():
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"probabilities must sum to 1, got {p.sum()}")
    return p


def focal_loss(probs, target: int, gamma: float, alpha_t: float | None = None,
               eps_floor: bool = False) -> float:
    """-alpha_t * (1 - p_t)^gamma * log(p_t).

    gamma = 0 with no alpha_t reduces to cross entropy. A zero target
    probability raises unless ``eps_floor`` is set, which clips p_t at
    1e-12 instead.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if alpha_t is not None and not 0.0 <= alpha_t <= 1.0:
        raise ValueError("alpha_t must lie in [0, 1]")
    p = _check_probs(probs)
    p_t = float(p[target])
    if p_t == 0.0:
        if not eps_floor:
            raise ValueError("target probability is zero (infinite loss); enable eps_floor to clip")
        p_t = 1e-12
    factor = 1.0 if alpha_t is None else alpha_t
    return float(-factor * (1.0 - p_t) ** gamma * np.log(p_t))


def ib_loss(probs, target: int, feature, eps: float) -> float:
    """Cross entropy attenuated by the sample's influence factor.

    The influence factor is the l1 gap between the prediction and the
    one-hot target times the l1 norm of the feature; eps keeps the
    denominator positive.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    p = _check_probs(probs)
    p_t = float(p[target])
    if p_t == 0.0:
        raise ValueError("target probability is zero (infinite loss)")
    one_hot = np.zeros_like(p)
    one_hot[target] = 1.0
    influence = float(np.abs(p - one_hot).sum()) * float(np.abs(np.asarray(feature, dtype=np.float64)).sum())
    return float(-np.log(p_t) / (influence + eps))


def ib_class_coefficients(counts: ClassCounts, alpha_scale: float) -> np.ndarray:
    """Per-class coefficients proportional to 1/n_c, summing to alpha_scale."""
    if alpha_scale <= 0:
        raise ValueError("alpha_scale must be positive")
    inv = 1.0 / _counts_array(counts)
    return alpha_scale * inv / inv.sum()


def _group_by_label(features, labels):
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("features must be (n, p) aligned with labels")
    return x, y, [int(c) for c in np.unique(y)]


def _top_ranges(block: np.ndarray, k: int):
    """The k largest pairwise distances in a class block, floored, with index pairs."""
    n = block.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    dists = np.array([max(float(np.linalg.norm(block[i] - block[j])), RANGE_DIST_FLOOR) for i, j in pairs])
    order = np.argsort(-dists, kind="stable")[: min(k, len(pairs))]
    return dists[order], [pairs[i] for i in order]


def range_loss(features, labels, k: int, margin: float, alpha: float, beta: float) -> float:
    """alpha * sum of per-class harmonic means of the k largest intra-class
    ranges, plus beta * hinge(margin - minimum center distance).

    Classes with fewer than two samples contribute no intra term; when a
    class has fewer than k pairwise distances, all available are used.
    """
    value, _ = range_loss_grad(features, labels, k, margin, alpha, beta)
    return value


def range_loss_grad(features, labels, k: int, margin: float, alpha: float, beta: float):
    """Range loss together with its gradient w.r.t. the feature matrix."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if margin <= 0:
        raise ValueError("margin must be positive")
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be >= 0")
    x, y, classes = _group_by_label(features, labels)
    grad = np.zeros_like(x)

    intra = 0.0
    for c in classes:
        idx = np.flatnonzero(y == c)
        if idx.size < 2:
            continue
        block = x[idx]
        dists, pairs = _top_ranges(block, k)
        inv_sum = float((1.0 / dists).sum())
        k_used = len(pairs)
        intra += k_used / inv_sum
        # d(k/S)/dD_j = (k/S^2) / D_j^2, chained through D_j = |h_i - h_j|.
        for d, (i, j) in zip(dists, pairs):
            if d <= RANGE_DIST_FLOOR:
                continue
            coeff = alpha * (k_used / inv_sum ** 2) / d ** 2
            diff = (block[i] - block[j]) / d
            grad[idx[i]] += coeff * diff
            grad[idx[j]] -= coeff * diff

    inter = 0.0
    if len(classes) >= 2:
        centers = {c: x[y == c].mean(axis=0) for c in classes}
        best = None
        for a_i, ca in enumerate(classes):
            for cb in classes[a_i + 1:]:
                d = float(np.linalg.norm(centers[ca] - centers[cb]))
                if best is None or d < best[0]:
                    best = (d, ca, cb)
        d_center, ca, cb = best
        inter = max(margin - d_center, 0.0)
        if inter > 0 and d_center > 0:
            direction = (centers[ca] - centers[cb]) / d_center
            na, nb = int((y == ca).sum()), int((y == cb).sum())
            grad[y == ca] += -beta * direction / na
            grad[y == cb] += beta * direction / nb
    elif beta > 0:
        raise ValueError("inter-class term needs at least two classes in the batch")

    return float(alpha * intra + beta * inter), grad
