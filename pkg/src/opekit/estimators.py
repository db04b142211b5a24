"""Scalar policy-value estimators built on importance weighting.

All estimators are deterministic functions of a validated
:class:`~opekit.data.Dataset`. The baseline-corrected family
``beta + mean(wr) - beta * mean(w)`` is evaluated as
``beta * (1 - mean(w)) + mean(wr)`` so that a baseline of zero reproduces
the plain importance-weighted mean bit for bit, and any baseline collapses
to that same mean when the weights average to exactly one.

Moments use the population normaliser 1/n and a two-pass centred
computation: means first, then moments of deviations. Runs over the same
dataset therefore agree to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Estimate
from .errors import (
    DegenerateWeights,
    FoldTooSmall,
    ValidationError,
    ZeroWeightSum,
)


@dataclass(frozen=True)
class MomentSummary:
    """First and second empirical moments of the weights and weighted rewards.

    Variances and the covariance are centred and use the 1/n normaliser.
    """

    mean_w: float
    mean_wr: float
    var_w: float
    var_wr: float
    cov_w_wr: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"moment summary needs n >= 1, got {self.n}")
        if self.var_w < 0 or self.var_wr < 0:
            raise ValidationError("variances cannot be negative")
        cross = self.cov_w_wr * self.cov_w_wr
        bound = self.var_w * self.var_wr
        if cross > bound + 1e-12 * max(cross, bound):
            raise ValidationError(
                f"covariance {self.cov_w_wr} violates the Cauchy-Schwarz bound "
                f"for variances {self.var_w}, {self.var_wr}"
            )


@dataclass(frozen=True)
class CrossFitConfig:
    """Fold layout for cross-fitted baseline estimation."""

    folds_k: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.folds_k < 2:
            raise ValidationError(f"cross-fitting needs at least 2 folds, got {self.folds_k}")
        if self.seed < 0:
            raise ValidationError(f"fold seed must be non-negative, got {self.seed}")


def _require_scalar(dataset) -> Dataset:
    if not isinstance(dataset, Dataset):
        raise ValidationError(
            f"expected a scalar Dataset, got {type(dataset).__name__}; "
            "use the ranking estimators for ranked data"
        )
    return dataset


def empirical_moments(dataset: Dataset) -> MomentSummary:
    """Two-pass centred moments of the weights and weighted rewards."""
    _require_scalar(dataset)
    w = dataset.weights
    wr = w * dataset.rewards
    mean_w = float(np.mean(w))
    mean_wr = float(np.mean(wr))
    dev_w = w - mean_w
    dev_wr = wr - mean_wr
    return MomentSummary(
        mean_w=mean_w,
        mean_wr=mean_wr,
        var_w=float(np.mean(dev_w * dev_w)),
        var_wr=float(np.mean(dev_wr * dev_wr)),
        cov_w_wr=float(np.mean(dev_w * dev_wr)),
        n=dataset.n,
    )


def ips(dataset: Dataset) -> Estimate:
    """Importance-weighted mean of the rewards."""
    _require_scalar(dataset)
    value = float(np.mean(dataset.weights * dataset.rewards))
    return Estimate(value=value, estimator_name="ips", n_used=dataset.n)


def snips(dataset: Dataset) -> Estimate:
    """Self-normalised variant: weighted reward mean over the weight mean."""
    _require_scalar(dataset)
    mean_w = float(np.mean(dataset.weights))
    if mean_w == 0.0:
        raise ZeroWeightSum()
    value = float(np.mean(dataset.weights * dataset.rewards) / mean_w)
    return Estimate(value=value, estimator_name="snips", n_used=dataset.n)


def beta_ips(dataset: Dataset, beta: float) -> Estimate:
    """Baseline-corrected estimator with a fixed additive baseline."""
    _require_scalar(dataset)
    b = float(beta)
    if not np.isfinite(b):
        raise ValidationError(f"baseline must be finite, got {beta}")
    mean_w = float(np.mean(dataset.weights))
    mean_wr = float(np.mean(dataset.weights * dataset.rewards))
    value = b * (1.0 - mean_w) + mean_wr
    return Estimate(value=value, estimator_name="beta-ips", n_used=dataset.n, baseline_used=b)


def beta_star_hat(dataset: Dataset, *, centered: bool = True) -> float:
    """Plug-in estimate of the variance-minimising baseline.

    The default is the centred ratio cov(w, wr) / var(w). With
    ``centered=False`` the ratio (mean(w*wr) - mean(wr)) / (mean(w^2) - 1)
    is used instead; it replaces the empirical weight mean with its known
    expectation of one and generally differs in finite samples.
    """
    _require_scalar(dataset)
    if centered:
        moments = empirical_moments(dataset)
        if moments.var_w == 0.0:
            raise DegenerateWeights()
        return moments.cov_w_wr / moments.var_w
    w = dataset.weights
    wr = w * dataset.rewards
    denominator = float(np.mean(w * w)) - 1.0
    if denominator == 0.0:
        raise DegenerateWeights(detail="mean squared weight equals one")
    numerator = float(np.mean(w * wr)) - float(np.mean(wr))
    return numerator / denominator


def beta_star_ips(dataset: Dataset, *, centered: bool = True) -> Estimate:
    """Baseline-corrected estimator at the plug-in baseline."""
    baseline = beta_star_hat(dataset, centered=centered)
    corrected = beta_ips(dataset, baseline)
    return Estimate(
        value=corrected.value,
        estimator_name="beta-star-ips",
        n_used=dataset.n,
        baseline_used=baseline,
    )


def fold_indices(n: int, config: CrossFitConfig) -> list[np.ndarray]:
    """Deterministic near-equal partition of range(n) into ``folds_k`` folds.

    Indices are shuffled by a generator seeded from ``config.seed`` and the
    folds are returned sorted, so the same configuration always produces the
    same partition.
    """
    if n // config.folds_k < 2:
        raise FoldTooSmall(n, config.folds_k)
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, config.folds_k)]


def cross_fitted_beta_ips(dataset: Dataset, config: CrossFitConfig = CrossFitConfig()) -> Estimate:
    """Cross-fitted variant of the plug-in baseline-corrected estimator.

    The data are partitioned into ``folds_k`` folds. Each fold in turn
    estimates the baseline, the corrected value is computed on the union of
    the remaining folds, and the per-fold values are averaged. Because the
    baseline never sees the entries it corrects, the result is exactly
    unbiased, at the cost of each baseline using only a 1/k share of the
    data.

    A fold with constant weights cannot estimate a baseline. That is only
    fatal when the baseline matters: if its evaluation complement has a
    weight mean of exactly one, every baseline gives the same value and
    zero is used; otherwise :class:`DegenerateWeights` is raised.
    """
    _require_scalar(dataset)
    folds = fold_indices(dataset.n, config)
    all_indices = np.arange(dataset.n)
    values = np.empty(len(folds))
    baselines = np.empty(len(folds))
    for f, fold in enumerate(folds):
        mask = np.ones(dataset.n, dtype=bool)
        mask[fold] = False
        complement = dataset.subset(all_indices[mask])
        fold_moments = empirical_moments(dataset.subset(fold))
        if fold_moments.var_w == 0.0:
            if (1.0 - float(np.mean(complement.weights))) != 0.0:
                raise DegenerateWeights(
                    detail=(
                        f"baseline fold {f} has constant weights and the evaluation "
                        "entries do not average to weight one"
                    )
                )
            baseline = 0.0
        else:
            baseline = fold_moments.cov_w_wr / fold_moments.var_w
        baselines[f] = baseline
        values[f] = beta_ips(complement, baseline).value
    return Estimate(
        value=float(np.mean(values)),
        estimator_name="cf-beta-star-ips",
        n_used=dataset.n,
        baseline_used=float(np.mean(baselines)),
    )
