"""Laplace mechanism, L1-sensitivities, and privacy-budget accounting.

Every noise draw in the pipeline is calibrated here. The sensitivity
formulas assume sample-wise normalized data (each sample has unit
Euclidean norm), which the preprocessing stage guarantees, and the
bounded neighboring notion: two datasets of the same publicly-known
size n that differ in the values of a single sample.

WARNING: deterministic, seeded noise exists so that pipelines are
bit-reproducible for testing and review. A seeded run is NOT
differentially private -- anyone who knows the seed can subtract the
noise. Production releases must use fresh OS entropy. The usual
floating-point caveats of the Laplace mechanism (Mironov-style attacks
on the low-order bits) also apply and are not mitigated here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VALID_QUERIES = ("mean", "covariance", "augmented_covariance", "mle_covariance")


def mean_sensitivity(m: int, n: int) -> float:
    """L1-sensitivity of the sample mean of n unit-norm samples in R^m.

    Replacing one unit-norm sample changes the mean by at most
    2*sqrt(m)/n in L1 norm.
    """
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}")
    return 2.0 * math.sqrt(m) / n


def cov_sensitivity(p: int, n: int) -> float:
    """L1-sensitivity of the second-moment matrix (1/n) * X Xᵀ.

    Valid when every column of X has Euclidean norm at most 1, which
    holds for unit-norm data pushed through an orthonormal projection.
    """
    if p < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got p={p}, n={n}")
    return 2.0 * math.sqrt(p) / n


def aug_cov_sensitivity(p: int, n: int, a: float) -> float:
    """L1-sensitivity of the label-augmented second-moment matrix.

    The feature block contributes 2*sqrt(p)/n, the two cross blocks
    contribute 4*a*sqrt(p)/n, and the scalar label block a^2/n, for
    labels bounded in [-a, a].
    """
    if p < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got p={p}, n={n}")
    if a <= 0:
        raise ValueError(f"label bound must be positive, got a={a}")
    return (2.0 * math.sqrt(p) + 4.0 * a * math.sqrt(p) + a * a) / n


def mle_cov_sensitivity(p: int, n: int) -> float:
    """L1-sensitivity of the mean-subtracted (MLE) covariance estimate.

    Exposed for comparison only -- the release path never calibrates
    noise with it. Equals (2*sqrt(p) + 2*n*sqrt(p))/n, computed in
    factored form so the ratio to ``cov_sensitivity`` is exactly n + 1.
    """
    return (n + 1) * cov_sensitivity(p, n)


def sensitivity_for(query: str, *, n: int, dim: int, a: float | None = None) -> float:
    """Closed-form sensitivity for a named query.

    ``dim`` is the ambient dimension of the query output: m for the
    mean, p for the covariance variants.
    """
    if query == "mean":
        return mean_sensitivity(dim, n)
    if query == "covariance":
        return cov_sensitivity(dim, n)
    if query == "augmented_covariance":
        if a is None:
            raise ValueError("augmented_covariance needs the label bound a")
        return aug_cov_sensitivity(dim, n, a)
    if query == "mle_covariance":
        return mle_cov_sensitivity(dim, n)
    raise ValueError(f"unknown query {query!r}, expected one of {VALID_QUERIES}")


@dataclass(frozen=True)
class SensitivitySpec:
    """A named query together with its closed-form L1-sensitivity."""

    query: str
    value: float
    n: int
    dim: int
    a: float | None = None

    @classmethod
    def for_query(cls, query: str, *, n: int, dim: int, a: float | None = None) -> "SensitivitySpec":
        return cls(query=query, value=sensitivity_for(query, n=n, dim=dim, a=a), n=n, dim=dim, a=a)


def laplace_perturb(values: np.ndarray, scale_b: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. Laplace(0, scale_b) noise to every entry of ``values``.

    Sampling uses the inverse CDF x = -b * sign(u) * ln(1 - 2|u|) with u
    uniform on (-0.5, 0.5), so draws are exactly reproducible from a
    seeded generator across platforms.
    """
    if scale_b <= 0:
        raise ValueError(f"Laplace scale must be positive, got {scale_b}")
    values = np.asarray(values, dtype=float)
    u = rng.random(values.shape) - 0.5
    # rng.random() covers [0, 1); redraw the measure-zero u = -0.5 edge
    # so log1p never sees -1.
    while np.any(u == -0.5):
        edge = u == -0.5
        u[edge] = rng.random(int(edge.sum())) - 0.5
    noise = -scale_b * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return values + noise


def split_budget(epsilon_total: float, mu_ratio: float = 0.3) -> tuple[float, float]:
    """Split a total budget into (epsilon_mu, epsilon_sigma).

    The default 30/70 split favors the covariance, which is the higher
    complexity parameter. epsilon_sigma comes from subtraction and
    epsilon_mu is then re-centered against it; the re-centering absorbs
    the subtraction's rounding so the two parts always sum back to
    epsilon_total bit-exactly.
    """
    if epsilon_total <= 0:
        raise ValueError(f"epsilon_total must be positive, got {epsilon_total}")
    if not 0.0 < mu_ratio < 1.0:
        raise ValueError(f"mu_ratio must lie in (0, 1), got {mu_ratio}")
    epsilon_sigma = epsilon_total - mu_ratio * epsilon_total
    epsilon_mu = epsilon_total - epsilon_sigma
    return epsilon_mu, epsilon_sigma


@dataclass(frozen=True)
class LedgerEntry:
    query: str
    sensitivity: float
    epsilon: float
    group: str | None = None  # entries sharing a group compose in parallel

    def as_dict(self) -> dict:
        return {
            "query": self.query,
            "sensitivity": self.sensitivity,
            "epsilon": self.epsilon,
            "group": self.group,
        }


class BudgetLedger:
    """Ordered record of privacy spends with serial/parallel composition.

    Entries without a group compose serially (their epsilons add).
    Entries sharing a group are spends on disjoint data partitions and
    compose in parallel: the group contributes its maximum epsilon once,
    no matter how many partitions spent it.
    """

    def __init__(self) -> None:
        self._entries: list[LedgerEntry] = []

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    def record(self, query: str, sensitivity: float, epsilon: float,
               group: str | None = None) -> LedgerEntry:
        if epsilon <= 0:
            raise ValueError(f"recorded epsilon must be positive, got {epsilon}")
        if sensitivity <= 0:
            raise ValueError(f"recorded sensitivity must be positive, got {sensitivity}")
        entry = LedgerEntry(query, sensitivity, epsilon, group)
        self._entries.append(entry)
        return entry

    def group_epsilons(self) -> dict[str, float]:
        """Maximum epsilon per parallel-composition group."""
        groups: dict[str, float] = {}
        for e in self._entries:
            if e.group is not None:
                groups[e.group] = max(groups.get(e.group, 0.0), e.epsilon)
        return groups

    def total(self) -> float:
        """Total privacy cost under serial + parallel composition.

        math.fsum makes the result independent of entry order, so
        reshuffling the ledger never changes the reported total.
        """
        contributions = [e.epsilon for e in self._entries if e.group is None]
        contributions.extend(self.group_epsilons().values())
        return math.fsum(contributions)

    def as_dicts(self) -> list[dict]:
        return [e.as_dict() for e in self._entries]

    def __len__(self) -> int:
        return len(self._entries)

    def __str__(self) -> str:
        lines = [f"{'query':<24} {'sensitivity':>14} {'epsilon':>10} {'group':>12}"]
        for e in self._entries:
            group = e.group if e.group is not None else "-"
            lines.append(f"{e.query:<24} {e.sensitivity:>14.6g} {e.epsilon:>10.4g} {group:>12}")
        lines.append(f"total epsilon: {self.total():.6g}")
        return "\n".join(lines)


def ledger_total(ledger: BudgetLedger) -> float:
    """Total epsilon of a ledger (module-level alias of ``total``)."""
    return ledger.total()
