"""Minimal downstream learners for scoring releases.

Deliberately tiny stand-ins for the heavyweight models a consumer of a
release might train: ordinary least squares for regression and a
nearest-class-mean rule for classification. They exist so utility can
be measured end to end (train on synthetic, test on real) without
pulling in a learning framework.
"""

from __future__ import annotations

import numpy as np


def ols_fit(features: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Least-squares coefficients (with intercept) for column-wise samples."""
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    design = np.vstack([features, np.ones(features.shape[1])]).T
    coef, *_ = np.linalg.lstsq(design, targets, rcond=None)
    return coef


def ols_predict(coef: np.ndarray, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    design = np.vstack([features, np.ones(features.shape[1])]).T
    return design @ coef


def class_means(features: np.ndarray, class_labels: np.ndarray) -> dict:
    """Per-class mean vectors of column-wise samples."""
    features = np.asarray(features, dtype=float)
    class_labels = np.asarray(class_labels)
    return {
        label: features[:, class_labels == label].mean(axis=1)
        for label in sorted(set(class_labels.tolist()), key=str)
    }


def nearest_class_mean(means: dict, features: np.ndarray) -> np.ndarray:
    """Assign each column-wise sample to the closest class mean."""
    features = np.asarray(features, dtype=float)
    labels = list(means.keys())
    dists = np.stack([
        np.linalg.norm(features - means[label][:, None], axis=0) for label in labels
    ])
    return np.array([labels[i] for i in dists.argmin(axis=0)])
