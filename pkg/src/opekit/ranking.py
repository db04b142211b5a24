"""Position-wise estimators for ranked logged feedback.

A ranked dataset factorises into scalar marginals, one per position, and
the total value is the sum of per-position values. Every estimator here
applies its scalar counterpart to each marginal, so a one-position ranked
dataset reproduces the scalar result bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RankedDataset
from .errors import DegenerateWeights, LengthMismatch, ValidationError, ZeroWeightSum
from .estimators import MomentSummary, beta_ips, empirical_moments, ips, snips


@dataclass(frozen=True)
class PositionEstimate:
    """Per-position value estimate with its marginal moments."""

    estimate: float
    baseline: float | None
    moments: MomentSummary


@dataclass(frozen=True)
class PositionwiseReport:
    """Position-wise estimates and their total.

    ``total`` is the fixed-order sum of the per-position estimates;
    ``baseline`` entries are set exactly for the baseline-corrected family.
    """

    per_position: tuple[PositionEstimate, ...]
    total: float
    estimator_name: str
    n_used: int

    def __post_init__(self) -> None:
        if not self.per_position:
            raise ValidationError("a position-wise report needs at least one position")
        check = float(np.sum(np.array([p.estimate for p in self.per_position])))
        if abs(check - self.total) > 1e-12 * max(1.0, abs(check), abs(self.total)):
            raise ValidationError(
                f"total {self.total} does not match the sum of positions {check}"
            )


def _require_ranked(dataset) -> RankedDataset:
    if not isinstance(dataset, RankedDataset):
        raise ValidationError(
            f"expected a RankedDataset, got {type(dataset).__name__}; "
            "use the scalar estimators for scalar data"
        )
    return dataset


def _positionwise(dataset: RankedDataset, name: str, one_position) -> PositionwiseReport:
    estimates = []
    for j in range(dataset.k):
        marginal = dataset.position(j)
        try:
            estimates.append(one_position(j, marginal))
        except ZeroWeightSum as exc:
            raise ZeroWeightSum(position=j) from exc
    total = float(np.sum(np.array([p.estimate for p in estimates])))
    return PositionwiseReport(
        per_position=tuple(estimates),
        total=total,
        estimator_name=name,
        n_used=dataset.n,
    )


def ipm(dataset: RankedDataset) -> PositionwiseReport:
    """Sum of per-position importance-weighted reward means."""
    _require_ranked(dataset)

    def one(j, marginal):
        return PositionEstimate(ips(marginal).value, None, empirical_moments(marginal))

    return _positionwise(dataset, "ipm", one)


def snipm(dataset: RankedDataset) -> PositionwiseReport:
    """Sum of per-position self-normalised estimates."""
    _require_ranked(dataset)

    def one(j, marginal):
        return PositionEstimate(snips(marginal).value, None, empirical_moments(marginal))

    return _positionwise(dataset, "snipm", one)


def beta_ipm(dataset: RankedDataset, betas) -> PositionwiseReport:
    """Sum of per-position baseline-corrected estimates at fixed baselines."""
    _require_ranked(dataset)
    b = np.asarray(betas, dtype=np.float64)
    if b.shape != (dataset.k,):
        raise LengthMismatch(
            f"expected {dataset.k} baselines for {dataset.k} positions, got shape {b.shape}"
        )
    if not np.isfinite(b).all():
        raise ValidationError("baselines must be finite")

    def one(j, marginal):
        estimate = beta_ips(marginal, float(b[j]))
        return PositionEstimate(estimate.value, estimate.baseline_used, empirical_moments(marginal))

    return _positionwise(dataset, "beta-ipm", one)


def beta_perp_star_hat(dataset: RankedDataset) -> np.ndarray:
    """Plug-in optimal baseline per position, cov(w, wr) / var(w) on each marginal.

    Raises :class:`DegenerateWeights` listing every position whose weights
    have zero variance.
    """
    _require_ranked(dataset)
    baselines = np.empty(dataset.k)
    degenerate = []
    for j in range(dataset.k):
        moments = empirical_moments(dataset.position(j))
        if moments.var_w == 0.0:
            degenerate.append(j)
        else:
            baselines[j] = moments.cov_w_wr / moments.var_w
    if degenerate:
        raise DegenerateWeights(positions=tuple(degenerate))
    baselines.setflags(write=False)
    return baselines


def beta_perp_star_ipm(dataset: RankedDataset) -> PositionwiseReport:
    """Sum of per-position baseline-corrected estimates at plug-in baselines."""
    _require_ranked(dataset)
    baselines = beta_perp_star_hat(dataset)
    report = beta_ipm(dataset, baselines)
    return PositionwiseReport(
        per_position=report.per_position,
        total=report.total,
        estimator_name="beta-perp-star-ipm",
        n_used=report.n_used,
    )
