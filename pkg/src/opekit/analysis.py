"""Closed-form variance and remainder diagnostics.

The self-normalised estimator differs from the baseline-corrected one at
the true value by an exactly computable remainder, and its asymptotic
variance exceeds the variance at the optimal baseline by a non-negative
gap with a closed form. Both quantities are evaluated here from moment
summaries or datasets, with no sampling involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DegenerateWeights, ValidationError, ZeroWeightSum
from .estimators import MomentSummary, _require_scalar


@dataclass(frozen=True)
class RemainderDiagnostics:
    """Exact decomposition of the self-normalised estimate around a value.

    With ``L_n = mean(wr) - value * mean(w)`` and ``W_bar = mean(w)``, the
    self-normalised estimate equals the baseline-corrected estimate at
    ``beta = value`` plus ``r_n = L_n * (1 - W_bar) / W_bar``. The
    linearised remainder drops the denominator. ``u_series`` holds
    ``w * (reward - value)`` and ``t_series`` holds ``w - 1``; their means
    are ``L_n`` and ``W_bar - 1``. ``event_holds`` records whether the
    weight mean stayed at or above one half, the regime in which the
    remainder admits quadratic tail control.
    """

    l_n: float
    w_bar: float
    r_n: float
    r_n_linearised: float
    event_holds: bool
    u_series: np.ndarray
    t_series: np.ndarray


@dataclass(frozen=True)
class VarianceGapReport:
    """Variance comparison between self-normalisation and the optimal baseline.

    ``var_beta`` is the closed-form variance of the baseline-corrected
    estimator at the reference value, which coincides with ``avar_snips``,
    the asymptotic variance of the self-normalised estimator.
    ``gap_delta = avar_snips - var_beta_star`` is non-negative and zero
    exactly when the reference value already is the optimal baseline.
    """

    var_beta: float
    var_beta_star: float
    avar_snips: float
    gap_delta: float
    n: int

    def __post_init__(self) -> None:
        if self.gap_delta < -1e-12:
            raise ValidationError(f"variance gap must be non-negative, got {self.gap_delta}")
        diff = self.avar_snips - self.var_beta_star
        scale = max(abs(self.avar_snips), abs(self.var_beta_star), abs(self.gap_delta))
        if abs(self.gap_delta - diff) > 1e-12 * max(scale, 1e-300):
            raise ValidationError(
                f"gap {self.gap_delta} does not match avar_snips - var_beta_star = {diff}"
            )


def beta_ips_variance(moments: MomentSummary, beta: float) -> float:
    """Variance of the baseline-corrected estimator at a fixed baseline.

    Equals ``(var_wr - 2 * beta * cov_w_wr + beta^2 * var_w) / n``.
    """
    b = float(beta)
    if not np.isfinite(b):
        raise ValidationError(f"baseline must be finite, got {beta}")
    return (moments.var_wr - 2.0 * b * moments.cov_w_wr + b * b * moments.var_w) / moments.n


def snips_avar(moments: MomentSummary, value: float) -> float:
    """Asymptotic variance of the self-normalised estimator.

    The self-normalised estimator linearises to the baseline-corrected one
    whose baseline is the true value, so the same quadratic applies at
    ``beta = value``.
    """
    return beta_ips_variance(moments, value)


def variance_gap(moments: MomentSummary, value: float) -> VarianceGapReport:
    """Closed-form gap between self-normalisation and the optimal baseline.

    The gap is evaluated as ``(value * var_w - cov_w_wr)^2 / (n * var_w)``,
    a ratio of a square to a positive number, so it is non-negative by
    construction and vanishes exactly when ``value`` equals the optimal
    baseline ``cov_w_wr / var_w``.
    """
    if moments.var_w == 0.0:
        raise DegenerateWeights(detail="the optimal baseline is undefined")
    v = float(value)
    if not np.isfinite(v):
        raise ValidationError(f"value must be finite, got {value}")
    residual = v * moments.var_w - moments.cov_w_wr
    gap = (residual * residual) / (moments.n * moments.var_w)
    avar = snips_avar(moments, v)
    beta_star = moments.cov_w_wr / moments.var_w
    return VarianceGapReport(
        var_beta=avar,
        var_beta_star=beta_ips_variance(moments, beta_star),
        avar_snips=avar,
        gap_delta=gap,
        n=moments.n,
    )


def remainder_diagnostics(dataset: Dataset, value: float) -> RemainderDiagnostics:
    """Evaluate the exact remainder decomposition on a dataset.

    Requires a non-zero weight mean; the self-normalised estimate does not
    exist otherwise.
    """
    _require_scalar(dataset)
    v = float(value)
    if not np.isfinite(v):
        raise ValidationError(f"value must be finite, got {value}")
    w = dataset.weights
    mean_w = float(np.mean(w))
    if mean_w == 0.0:
        raise ZeroWeightSum()
    mean_wr = float(np.mean(w * dataset.rewards))
    l_n = mean_wr - v * mean_w
    u_series = w * (dataset.rewards - v)
    t_series = w - 1.0
    u_series.setflags(write=False)
    t_series.setflags(write=False)
    # Internal consistency: the series were built from the same columns the
    # scalars came from, so their means can only differ by accumulated
    # rounding in the rearranged sums.
    scale = max(1.0, abs(mean_wr), abs(v) * abs(mean_w))
    assert abs(float(np.mean(u_series)) - l_n) <= 1e-12 * scale
    assert abs(float(np.mean(t_series)) - (mean_w - 1.0)) <= 1e-12 * max(1.0, abs(mean_w))
    return RemainderDiagnostics(
        l_n=l_n,
        w_bar=mean_w,
        r_n=l_n * (1.0 - mean_w) / mean_w,
        r_n_linearised=l_n * (1.0 - mean_w),
        event_holds=bool(mean_w >= 0.5),
        u_series=u_series,
        t_series=t_series,
    )


def hoeffding_tail_bound(n: int, weight_bound: float) -> float:
    """Upper bound on the probability that the weight mean drops below one half.

    The weights live in ``[0, weight_bound]`` with mean one, so the bound is
    ``exp(-n / (2 * weight_bound^2))``.
    """
    if n < 1:
        raise ValidationError(f"n must be at least 1, got {n}")
    if not np.isfinite(weight_bound) or weight_bound <= 0:
        raise ValidationError(f"weight bound must be a positive finite number, got {weight_bound}")
    return math.exp(-n / (2.0 * weight_bound * weight_bound))
