"""Utility metrics for scoring releases.

All matrices here follow the package's internal orientation: samples
are columns. The silhouette coefficient and k-means are the clustering
pair; RMSE scores regression; the normality diagnostic quantifies how
Gaussian each projected coordinate looks, which is the property the
low-dimensional projection is supposed to buy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class EvalReport:
    metric: str
    value: float
    n_points: int
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"metric": self.metric, "value": self.value,
                "n_points": self.n_points, "params": self.params}


def silhouette(X: np.ndarray, assignments: np.ndarray) -> float:
    """Mean silhouette coefficient of a clustering.

    For each point, a(i) is the mean distance to the other members of
    its own cluster and b(i) the smallest mean distance to any other
    cluster; the point's score is (b - a) / max(a, b). Points in
    singleton clusters score 0, since a(i) is undefined there. The
    result lies in [-1, 1]; higher is better.
    """
    X = np.asarray(X, dtype=float)
    assignments = np.asarray(assignments)
    n = X.shape[1]
    if assignments.shape != (n,):
        raise ValueError(f"assignments must have length {n}, got {assignments.shape}")
    labels, inverse = np.unique(assignments, return_inverse=True)
    k = len(labels)
    if k < 2:
        raise ValueError("silhouette needs at least two clusters")

    points = X.T
    dists = cdist(points, points)
    sizes = np.bincount(inverse, minlength=k)
    # sum of distances from each point to every cluster, shape (n, k)
    cluster_sums = np.zeros((n, k))
    for c in range(k):
        cluster_sums[:, c] = dists[:, inverse == c].sum(axis=1)

    scores = np.zeros(n)
    for i in range(n):
        own = inverse[i]
        if sizes[own] == 1:
            continue  # singleton: score stays 0
        a = cluster_sums[i, own] / (sizes[own] - 1)  # excludes the zero self-distance
        other_means = [cluster_sums[i, c] / sizes[c] for c in range(k) if c != own]
        b = min(other_means)
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def kmeans(X: np.ndarray, k: int, max_iter: int = 100,
           rng: np.random.Generator | None = None) -> np.ndarray:
    """Lloyd's algorithm; returns the cluster index of every sample.

    Centroids start at k distinct randomly chosen samples and iterate
    until the assignment reaches a fixpoint or max_iter passes. A
    cluster that empties steals the point currently farthest from its
    own centroid, which keeps the objective non-increasing. Fixing the
    rng seed makes the result deterministic.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if k > n:
        raise ValueError(f"cannot form k={k} clusters from n={n} samples")
    if rng is None:
        rng = np.random.default_rng()

    points = X.T
    centroids = points[rng.choice(n, size=k, replace=False)].copy()
    assign = np.full(n, -1)
    for _ in range(max_iter):
        dists = cdist(points, centroids)
        new_assign = dists.argmin(axis=1)

        for empty in np.setdiff1d(np.arange(k), new_assign):
            sizes = np.bincount(new_assign, minlength=k)
            movable = sizes[new_assign] > 1
            donor = int(np.argmax(np.where(movable, dists[np.arange(n), new_assign], -1.0)))
            new_assign[donor] = empty
            centroids[empty] = points[donor]

        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = points[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    return assign


def kmeans_objective(X: np.ndarray, assignments: np.ndarray) -> float:
    """Sum of squared distances to the assigned cluster means."""
    X = np.asarray(X, dtype=float)
    total = 0.0
    for c in np.unique(assignments):
        members = X[:, assignments == c]
        centroid = members.mean(axis=1, keepdims=True)
        total += float(((members - centroid) ** 2).sum())
    return total


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Root-mean-square error between two equal-length vectors."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError(
            f"pred and truth must be equal-length non-empty vectors, got "
            f"{pred.shape} and {truth.shape}"
        )
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


@dataclass(frozen=True)
class NormalityReport:
    """Per-coordinate normality distances for a projected dataset."""

    ks_distances: tuple[float, ...]
    max_ks: float
    mean_ks: float
    n_samples: int
    degenerate_coords: tuple[int, ...]
    expected_sigma: float | None = None

    def as_dict(self) -> dict:
        return {
            "ks_distances": list(self.ks_distances),
            "max_ks": self.max_ks,
            "mean_ks": self.mean_ks,
            "n_samples": self.n_samples,
            "degenerate_coords": list(self.degenerate_coords),
            "expected_sigma": self.expected_sigma,
        }


def normality_diagnostic(X_tilde: np.ndarray, orig_dim: int | None = None) -> NormalityReport:
    """Kolmogorov-Smirnov distance of each coordinate to the normal.

    Every row (coordinate) is standardized and compared against N(0, 1)
    with the one-sample KS statistic. Constant coordinates cannot be
    standardized; they are flagged and assigned the KS distance 0.5 of
    a point mass at the normal's median. When the original dimension m
    is supplied, the report includes 1/sqrt(m), the marginal scale that
    unit-norm data is expected to project to.
    """
    X_tilde = np.asarray(X_tilde, dtype=float)
    if X_tilde.ndim != 2:
        raise ValueError(f"expected a p x n matrix, got shape {X_tilde.shape}")
    n = X_tilde.shape[1]
    if n < 30:
        raise ValueError(f"need at least 30 samples for a meaningful test, got {n}")

    distances = []
    degenerate = []
    for j, coord in enumerate(X_tilde):
        std = coord.std()
        if std == 0.0:
            distances.append(0.5)
            degenerate.append(j)
            continue
        standardized = (coord - coord.mean()) / std
        distances.append(float(stats.kstest(standardized, "norm").statistic))

    return NormalityReport(
        ks_distances=tuple(distances),
        max_ks=max(distances),
        mean_ks=float(np.mean(distances)),
        n_samples=n,
        degenerate_coords=tuple(degenerate),
        expected_sigma=1.0 / math.sqrt(orig_dim) if orig_dim else None,
    )
