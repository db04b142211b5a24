"""Seeded Monte Carlo studies over synthetic environments.

Replicates are paired: every estimator in a study cell is evaluated on
the same sampled dataset, replicate by replicate, so comparisons between
estimators difference out the shared sampling noise. Replicate ``r`` at
sample size ``n`` draws its generator from
``SeedSequence((master_seed, n, r))``, which depends on nothing else;
results are identical for any estimator list, chunking, or worker count.

A replicate on which an estimator's precondition fails is recorded and
its cell statistics use the surviving replicates. More than 1% failures
for any estimator at any sample size aborts the study, because then the
survivors no longer represent the sampling distribution.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import remainder_diagnostics, variance_gap
from .errors import (
    DegenerateX,
    EstimationError,
    ExcessiveFailureRate,
    NonPositiveMean,
    PreconditionNotMet,
    TooFewReplicates,
    UnknownEstimator,
    ValidationError,
)
from .estimators import (
    CrossFitConfig,
    MomentSummary,
    beta_ips,
    beta_star_ips,
    cross_fitted_beta_ips,
    ips,
    snips,
)
from .ranking import beta_ipm, beta_perp_star_ipm, ipm, snipm
from .simulator import (
    BanditScenario,
    RankingEnv,
    population_moments,
    sample_logs,
    sample_ranked_logs,
    true_value,
    weight_bound,
)

_SCALAR_PLAIN = ("ips", "snips", "beta-star-ips", "cf-beta-star-ips", "remainder-sq")
_RANKED_PLAIN = ("ipm", "snipm", "beta-perp-star-ipm")


@dataclass(frozen=True)
class MetricSpec:
    """A parsed estimator or diagnostic metric specification."""

    name: str
    params: tuple[float, ...] = ()

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(repr(p) for p in self.params)


def parse_estimator_spec(spec) -> MetricSpec:
    """Parse ``"name"`` or ``"name:param[,param...]"`` into a :class:`MetricSpec`."""
    if isinstance(spec, MetricSpec):
        return spec
    text = str(spec).strip()
    name, sep, arg = text.partition(":")
    name = name.strip()
    if name in _SCALAR_PLAIN or name in _RANKED_PLAIN:
        if sep:
            raise UnknownEstimator(f"{name} takes no parameter, got {text!r}")
        return MetricSpec(name)
    if name in ("beta-ips", "beta-ipm"):
        if not sep or not arg.strip():
            raise UnknownEstimator(f"{name} needs a baseline, e.g. {name}:0.5")
        try:
            params = tuple(float(p) for p in arg.split(","))
        except ValueError as exc:
            raise UnknownEstimator(f"cannot parse baselines in {text!r}") from exc
        if name == "beta-ips" and len(params) != 1:
            raise UnknownEstimator(f"beta-ips takes exactly one baseline, got {text!r}")
        return MetricSpec(name, params)
    raise UnknownEstimator(f"unknown estimator {text!r}")


def _is_scalar_metric(spec: MetricSpec) -> bool:
    return spec.name in _SCALAR_PLAIN or spec.name == "beta-ips"


def _check_spec_kind(spec: MetricSpec, scenario) -> None:
    scalar_scenario = isinstance(scenario, BanditScenario)
    if _is_scalar_metric(spec) and not scalar_scenario:
        raise UnknownEstimator(f"{spec.label} applies to scalar scenarios only")
    if not _is_scalar_metric(spec) and scalar_scenario:
        raise UnknownEstimator(f"{spec.label} applies to ranking scenarios only")


def _metric_labels(spec: MetricSpec, scenario) -> list[str]:
    if isinstance(scenario, BanditScenario):
        return [spec.label]
    k = scenario.k
    return [f"{spec.label}[pos{j + 1}]" for j in range(k)] + [f"{spec.label}[total]"]


def _compile_metric(spec: MetricSpec, scenario, folds: int, master_seed: int, oracle_value):
    name = spec.name
    if name == "ips":
        return lambda d: (ips(d).value,)
    if name == "snips":
        return lambda d: (snips(d).value,)
    if name == "beta-ips":
        baseline = spec.params[0]
        return lambda d: (beta_ips(d, baseline).value,)
    if name == "beta-star-ips":
        return lambda d: (beta_star_ips(d).value,)
    if name == "cf-beta-star-ips":
        config = CrossFitConfig(folds_k=folds, seed=master_seed)
        return lambda d: (cross_fitted_beta_ips(d, config).value,)
    if name == "remainder-sq":
        value = float(oracle_value)
        return lambda d: (remainder_diagnostics(d, value).r_n ** 2,)

    def positionwise(report):
        return tuple(p.estimate for p in report.per_position) + (report.total,)

    if name == "ipm":
        return lambda d: positionwise(ipm(d))
    if name == "snipm":
        return lambda d: positionwise(snipm(d))
    if name == "beta-ipm":
        baselines = np.asarray(spec.params)
        return lambda d: positionwise(beta_ipm(d, baselines))
    if name == "beta-perp-star-ipm":
        return lambda d: positionwise(beta_perp_star_ipm(d))
    raise UnknownEstimator(f"unknown estimator {spec.label!r}")


def _sample_dataset(scenario, n: int, master_seed: int, replicate: int):
    seed = np.random.SeedSequence((master_seed, n, replicate))
    if isinstance(scenario, BanditScenario):
        return sample_logs(scenario.env, scenario.logging_policy, scenario.target_policy, n, seed)
    return sample_ranked_logs(scenario, n, seed)


def _replicate_chunk(scenario, n, master_seed, start, stop, specs, folds, oracle_value):
    """Evaluate all metrics on replicates [start, stop); NaN marks failures."""
    compiled = [
        (_metric_labels(spec, scenario), _compile_metric(spec, scenario, folds, master_seed, oracle_value))
        for spec in specs
    ]
    n_cols = sum(len(labels) for labels, _ in compiled)
    values = np.full((stop - start, n_cols), np.nan)
    failures: list[tuple[str, int, str]] = []
    for row, replicate in enumerate(range(start, stop)):
        dataset = _sample_dataset(scenario, n, master_seed, replicate)
        offset = 0
        for spec, (labels, fn) in zip(specs, compiled):
            width = len(labels)
            try:
                values[row, offset : offset + width] = fn(dataset)
            except EstimationError as exc:
                values[row, offset : offset + width] = np.nan
                failures.append((spec.label, replicate, type(exc).__name__))
            offset += width
    return start, values, failures


@dataclass(frozen=True)
class FailureRecord:
    """One replicate on which a metric's precondition failed."""

    metric: str
    replicate: int
    error: str


@dataclass(frozen=True, eq=False)
class ReplicateMatrix:
    """Per-replicate metric values at one sample size, NaN where failed."""

    n: int
    labels: tuple[str, ...]
    values: np.ndarray
    failures: tuple[FailureRecord, ...]

    def column(self, label: str) -> np.ndarray:
        if label not in self.labels:
            raise ValidationError(f"no metric {label!r} in this matrix")
        return self.values[:, self.labels.index(label)]


def replicate_estimates(
    scenario,
    n: int,
    replicates: int,
    master_seed: int,
    estimators,
    *,
    folds: int = 5,
    oracle_value: float | None = None,
    n_jobs: int = 1,
) -> ReplicateMatrix:
    """Paired per-replicate estimates for every requested metric.

    ``oracle_value`` is only consulted by the squared-remainder metric; it
    defaults to the exact enumerated value of the target policy.
    """
    specs = tuple(parse_estimator_spec(e) for e in estimators)
    if not specs:
        raise ValidationError("at least one estimator is required")
    for spec in specs:
        _check_spec_kind(spec, scenario)
    if replicates < 2:
        raise TooFewReplicates(replicates)
    if n < 1:
        raise ValidationError(f"sample size must be at least 1, got {n}")
    if master_seed < 0:
        raise ValidationError(f"master seed must be non-negative, got {master_seed}")
    if n_jobs < 1:
        raise ValidationError(f"worker count must be at least 1, got {n_jobs}")
    if oracle_value is None and any(s.name == "remainder-sq" for s in specs):
        oracle_value = true_value(scenario.env, scenario.target_policy)

    if n_jobs == 1:
        chunks = [_replicate_chunk(scenario, n, master_seed, 0, replicates, specs, folds, oracle_value)]
    else:
        size = max(1, -(-replicates // (n_jobs * 4)))
        starts = list(range(0, replicates, size))
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [
                pool.submit(
                    _replicate_chunk,
                    scenario,
                    n,
                    master_seed,
                    start,
                    min(start + size, replicates),
                    specs,
                    folds,
                    oracle_value,
                )
                for start in starts
            ]
            chunks = [future.result() for future in futures]
    chunks.sort(key=lambda item: item[0])
    values = np.vstack([chunk[1] for chunk in chunks])
    values.setflags(write=False)
    failures = tuple(
        FailureRecord(metric, replicate, error)
        for _, _, chunk_failures in chunks
        for metric, replicate, error in chunk_failures
    )
    labels = tuple(
        label for spec in specs for label in _metric_labels(spec, scenario)
    )
    return ReplicateMatrix(n=n, labels=labels, values=values, failures=failures)


def mse_decompose(estimates, true_value: float) -> tuple[float, float, float]:
    """Split mean squared error into bias and variance around ``true_value``.

    Returns ``(bias, variance, mse)`` with the 1/m normaliser throughout,
    so ``mse == bias**2 + variance`` up to rounding.
    """
    arr = np.asarray(estimates, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"estimates must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise TooFewReplicates(arr.shape[0])
    if not np.isfinite(arr).all():
        raise ValidationError("estimates must be finite; drop failed replicates first")
    target = float(true_value)
    mean = float(np.mean(arr))
    deviations = arr - mean
    errors = arr - target
    bias = mean - target
    variance = float(np.mean(deviations * deviations))
    mse = float(np.mean(errors * errors))
    return bias, variance, mse


def paired_mse_difference(a, b, true_value: float) -> tuple[float, float]:
    """Mean and standard error of ``(b - v)^2 - (a - v)^2`` over paired replicates.

    A positive difference means ``a`` has the smaller mean squared error.
    The standard error comes from the per-replicate differences, which is
    what pairing buys: shared sampling noise cancels inside each term.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("paired comparison needs two equal-length vectors")
    if x.shape[0] < 2:
        raise TooFewReplicates(x.shape[0])
    v = float(true_value)
    d = (y - v) ** 2 - (x - v) ** 2
    diff = float(np.mean(d))
    se = float(np.std(d, ddof=1) / np.sqrt(d.shape[0]))
    return diff, se


def paired_variance_difference(a, b) -> tuple[float, float]:
    """Mean and standard error of the variance difference var(b) - var(a).

    Uses the influence-function form ``(b - mean(b))^2 - (a - mean(a))^2``
    per replicate, so the standard error accounts for the pairing.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("paired comparison needs two equal-length vectors")
    if x.shape[0] < 2:
        raise TooFewReplicates(x.shape[0])
    dx = x - float(np.mean(x))
    dy = y - float(np.mean(y))
    d = dy * dy - dx * dx
    diff = float(np.mean(d))
    se = float(np.std(d, ddof=1) / np.sqrt(d.shape[0]))
    return diff, se


def fit_loglog_slope(points) -> tuple[float, float]:
    """Least-squares slope and intercept of log(y) against log(x).

    ``points`` is a sequence of ``(x, y)`` pairs with positive coordinates
    and at least two distinct x values.
    """
    pts = list(points)
    if len(pts) < 2:
        raise DegenerateX(f"need at least two points for a log-log fit, got {len(pts)}")
    x = np.array([float(p[0]) for p in pts])
    y = np.array([float(p[1]) for p in pts])
    if (x <= 0).any() or (y <= 0).any():
        raise DegenerateX("log-log fit needs strictly positive coordinates")
    if np.unique(x).shape[0] < 2:
        raise DegenerateX("log-log fit needs at least two distinct x values")
    slope, intercept = np.polyfit(np.log(x), np.log(y), deg=1)
    return float(slope), float(intercept)


@dataclass(frozen=True)
class OracleTarget:
    """Exact reference quantities for one estimation target.

    ``label`` is ``"value"`` for scalar scenarios and ``"pos1"``,
    ``"pos2"``, ..., ``"total"`` for ranking scenarios. The variance
    quantities are per single sample; divide by n for a sample-size-n
    estimator. They and ``beta_star`` are ``None`` when the weights are
    degenerate, and for the ranking total, which aggregates positions.
    """

    label: str
    value: float
    moments: MomentSummary | None
    beta_star: float | None
    avar_snips: float | None
    var_beta_star: float | None
    delta_per_sample: float | None


@dataclass(frozen=True)
class OracleReport:
    """Enumerated truths for every target of a scenario."""

    targets: tuple[OracleTarget, ...]

    def target(self, label: str) -> OracleTarget:
        for t in self.targets:
            if t.label == label:
                return t
        raise ValidationError(f"no oracle target {label!r}")

    @property
    def value(self) -> float:
        """The scalar value, or the total for ranking scenarios."""
        labels = [t.label for t in self.targets]
        return self.target("value" if "value" in labels else "total").value


def _scalar_oracle_target(label: str, scenario: BanditScenario) -> OracleTarget:
    v = true_value(scenario.env, scenario.target_policy)
    moments = population_moments(scenario.env, scenario.logging_policy, scenario.target_policy)
    if moments.var_w > 0:
        gap = variance_gap(moments, v)
        beta_star = moments.cov_w_wr / moments.var_w
        avar = gap.avar_snips
        var_star = gap.var_beta_star
        delta = gap.gap_delta
    else:
        beta_star = avar = var_star = delta = None
    return OracleTarget(
        label=label,
        value=v,
        moments=moments,
        beta_star=beta_star,
        avar_snips=avar,
        var_beta_star=var_star,
        delta_per_sample=delta,
    )


def oracle_report(scenario) -> OracleReport:
    """Exact values, moments, and optimal baselines by enumeration."""
    if isinstance(scenario, BanditScenario):
        return OracleReport(targets=(_scalar_oracle_target("value", scenario),))
    if not isinstance(scenario, RankingEnv):
        raise ValidationError(f"unsupported scenario type {type(scenario).__name__}")
    targets = [
        _scalar_oracle_target(f"pos{j + 1}", scenario.position_scenario(j))
        for j in range(scenario.k)
    ]
    total = float(np.sum(np.array([t.value for t in targets])))
    targets.append(
        OracleTarget(
            label="total",
            value=total,
            moments=None,
            beta_star=None,
            avar_snips=None,
            var_beta_star=None,
            delta_per_sample=None,
        )
    )
    return OracleReport(targets=tuple(targets))


def _metric_targets(specs, scenario, oracle: OracleReport) -> dict[str, float]:
    targets: dict[str, float] = {}
    for spec in specs:
        if isinstance(scenario, BanditScenario):
            targets[spec.label] = 0.0 if spec.name == "remainder-sq" else oracle.target("value").value
        else:
            for j in range(scenario.k):
                targets[f"{spec.label}[pos{j + 1}]"] = oracle.target(f"pos{j + 1}").value
            targets[f"{spec.label}[total]"] = oracle.target("total").value
    return targets


@dataclass(frozen=True)
class StudyConfig:
    """Everything a study needs; the seed fully determines the draws."""

    scenario: object
    scenario_label: str
    n_grid: tuple[int, ...]
    replicates: int
    master_seed: int
    estimators: tuple[str, ...] = ()
    folds: int = 5

    def __post_init__(self) -> None:
        if not isinstance(self.scenario, (BanditScenario, RankingEnv)):
            raise ValidationError(
                f"scenario must be a BanditScenario or RankingEnv, got {type(self.scenario).__name__}"
            )
        grid = tuple(int(v) for v in self.n_grid)
        if not grid:
            raise ValidationError("the sample size grid cannot be empty")
        if any(v < 1 for v in grid):
            raise ValidationError("sample sizes must be at least 1")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError(f"the sample size grid must be strictly increasing, got {grid}")
        object.__setattr__(self, "n_grid", grid)
        if self.replicates < 100:
            raise ValidationError(
                f"studies need at least 100 replicates for stable cell statistics, got {self.replicates}"
            )
        if self.master_seed < 0:
            raise ValidationError(f"master seed must be non-negative, got {self.master_seed}")
        if self.folds < 2:
            raise ValidationError(f"cross-fitting needs at least 2 folds, got {self.folds}")
        object.__setattr__(self, "estimators", tuple(str(e) for e in self.estimators))


@dataclass(frozen=True)
class StudyRow:
    """Cell statistics for one metric at one sample size."""

    estimator: str
    n: int
    mean_estimate: float
    bias: float
    variance: float
    mse: float
    std_error: float
    oracle_value: float
    n_used: int
    n_failed: int

    def __post_init__(self) -> None:
        closure = self.bias * self.bias + self.variance
        if abs(self.mse - closure) > 1e-10 * max(abs(self.mse), closure, 1e-300):
            raise ValidationError(
                f"mse {self.mse} does not decompose into bias^2 + variance = {closure}"
            )


@dataclass(frozen=True, eq=False)
class StudyReport:
    """Aggregated study output plus the configuration echo that produced it.

    ``weight_bound`` is the scenario's largest importance weight; it feeds
    the theoretical ceiling on replicate failure frequency reported next
    to the tallied failures.
    """

    rows: tuple[StudyRow, ...]
    oracle: OracleReport
    scenario_label: str
    n_grid: tuple[int, ...]
    replicates: int
    master_seed: int
    estimators: tuple[str, ...]
    folds: int
    failures: tuple[FailureRecord, ...] = ()
    weight_bound: float = float("nan")


def scenario_weight_bound(scenario) -> float:
    """The largest importance weight the scenario can produce."""
    if isinstance(scenario, BanditScenario):
        return weight_bound(
            scenario.logging_policy, scenario.target_policy, scenario.env.context_probs
        )
    return max(
        weight_bound(pos.logging_policy, pos.target_policy, scenario.context_probs)
        for pos in scenario.positions
    )


def _rows_for_matrix(matrix: ReplicateMatrix, targets: dict[str, float], replicates: int) -> list[StudyRow]:
    rows = []
    for index, label in enumerate(matrix.labels):
        column = matrix.values[:, index]
        finite = np.isfinite(column)
        n_failed = int(column.shape[0] - int(finite.sum()))
        if n_failed > 0.01 * replicates:
            raise ExcessiveFailureRate(label, matrix.n, n_failed, replicates)
        kept = column[finite]
        target = targets[label]
        bias, variance, mse = mse_decompose(kept, target)
        rows.append(
            StudyRow(
                estimator=label,
                n=matrix.n,
                mean_estimate=float(np.mean(kept)),
                bias=bias,
                variance=variance,
                mse=mse,
                std_error=float(np.sqrt(variance / (kept.shape[0] - 1))),
                oracle_value=target,
                n_used=int(kept.shape[0]),
                n_failed=n_failed,
            )
        )
    return rows


def run_mc_study(config: StudyConfig, n_jobs: int = 1) -> StudyReport:
    """Bias, variance, and MSE for each estimator over the sample size grid."""
    specs = tuple(parse_estimator_spec(e) for e in config.estimators)
    if not specs:
        raise ValidationError("the study needs at least one estimator")
    for spec in specs:
        _check_spec_kind(spec, config.scenario)
    oracle = oracle_report(config.scenario)
    targets = _metric_targets(specs, config.scenario, oracle)
    oracle_value = oracle.value if isinstance(config.scenario, BanditScenario) else None
    rows: list[StudyRow] = []
    failures: list[FailureRecord] = []
    for n in config.n_grid:
        matrix = replicate_estimates(
            config.scenario,
            n,
            config.replicates,
            config.master_seed,
            specs,
            folds=config.folds,
            oracle_value=oracle_value,
            n_jobs=n_jobs,
        )
        rows.extend(_rows_for_matrix(matrix, targets, config.replicates))
        failures.extend(matrix.failures)
    return StudyReport(
        rows=tuple(rows),
        oracle=oracle,
        scenario_label=config.scenario_label,
        n_grid=config.n_grid,
        replicates=config.replicates,
        master_seed=config.master_seed,
        estimators=tuple(spec.label for spec in specs),
        folds=config.folds,
        failures=tuple(failures),
        weight_bound=scenario_weight_bound(config.scenario),
    )


@dataclass(frozen=True)
class DominanceCell:
    """Paired MSE comparison at one sample size and target."""

    n: int
    target: str
    mse_optimal: float
    mse_self_normalised: float
    mse_difference: float
    se_difference: float
    dominant: bool
    n_pairs: int


@dataclass(frozen=True, eq=False)
class DominanceReport:
    """Where the plug-in optimal baseline beats self-normalisation.

    ``smallest_dominant_n`` maps each target to the smallest grid sample
    size at which the paired MSE difference exceeds twice its standard
    error, or ``None`` if that never happens on the grid.
    """

    study: StudyReport
    cells: tuple[DominanceCell, ...]
    smallest_dominant_n: dict[str, int | None]


def dominance_check(config: StudyConfig, n_jobs: int = 1) -> DominanceReport:
    """Paired comparison of the plug-in baseline against self-normalisation.

    Requires a scenario whose optimal baseline is defined and differs from
    the true value; otherwise the two estimators have the same asymptotic
    variance and there is nothing to dominate.
    """
    scalar = isinstance(config.scenario, BanditScenario)
    pair = ("beta-star-ips", "snips") if scalar else ("beta-perp-star-ipm", "snipm")
    oracle = oracle_report(config.scenario)
    compare_labels = ["value"] if scalar else [f"pos{j + 1}" for j in range(config.scenario.k)]
    for label in compare_labels:
        target = oracle.target(label)
        if target.beta_star is None:
            raise PreconditionNotMet(
                f"{label}: the optimal baseline is undefined (degenerate weights)"
            )
        scale = max(1.0, abs(target.value), abs(target.beta_star))
        if abs(target.beta_star - target.value) <= 1e-9 * scale:
            raise PreconditionNotMet(
                f"{label}: the optimal baseline equals the true value, so "
                "self-normalisation is already asymptotically optimal"
            )
    specs = tuple(parse_estimator_spec(e) for e in pair)
    targets = _metric_targets(specs, config.scenario, oracle)
    rows: list[StudyRow] = []
    failures: list[FailureRecord] = []
    cells: list[DominanceCell] = []
    for n in config.n_grid:
        matrix = replicate_estimates(
            config.scenario,
            n,
            config.replicates,
            config.master_seed,
            specs,
            folds=config.folds,
            n_jobs=n_jobs,
        )
        rows.extend(_rows_for_matrix(matrix, targets, config.replicates))
        failures.extend(matrix.failures)
        for label in compare_labels:
            if scalar:
                optimal = matrix.column(pair[0])
                selfnorm = matrix.column(pair[1])
                value = oracle.target("value").value
            else:
                optimal = matrix.column(f"{pair[0]}[{label}]")
                selfnorm = matrix.column(f"{pair[1]}[{label}]")
                value = oracle.target(label).value
            paired = np.isfinite(optimal) & np.isfinite(selfnorm)
            if int(paired.sum()) < 2:
                raise TooFewReplicates(int(paired.sum()))
            diff, se = paired_mse_difference(optimal[paired], selfnorm[paired], value)
            _, _, mse_optimal = mse_decompose(optimal[paired], value)
            _, _, mse_selfnorm = mse_decompose(selfnorm[paired], value)
            cells.append(
                DominanceCell(
                    n=n,
                    target=label,
                    mse_optimal=mse_optimal,
                    mse_self_normalised=mse_selfnorm,
                    mse_difference=diff,
                    se_difference=se,
                    dominant=bool(diff > 2.0 * se),
                    n_pairs=int(paired.sum()),
                )
            )
    smallest: dict[str, int | None] = {}
    for label in compare_labels:
        dominant_ns = [c.n for c in cells if c.target == label and c.dominant]
        smallest[label] = min(dominant_ns) if dominant_ns else None
    study = StudyReport(
        rows=tuple(rows),
        oracle=oracle,
        scenario_label=config.scenario_label,
        n_grid=config.n_grid,
        replicates=config.replicates,
        master_seed=config.master_seed,
        estimators=pair,
        folds=config.folds,
        failures=tuple(failures),
        weight_bound=scenario_weight_bound(config.scenario),
    )
    return DominanceReport(study=study, cells=tuple(cells), smallest_dominant_n=smallest)


@dataclass(frozen=True, eq=False)
class DecayReport:
    """Decay rate of the mean squared remainder over the sample size grid.

    ``slope`` is the log-log slope of ``mean(r_n^2)`` against ``n``; the
    quadratic remainder theory predicts a value near -2. Cells whose mean
    square underflows to zero or below are dropped and listed.
    """

    study: StudyReport
    true_value: float
    slope: float
    intercept: float
    dropped_cells: tuple[int, ...]


def _check_rate_grid(n_grid: tuple[int, ...]) -> None:
    """Rate fits need enough leverage: 4 grid points spanning 1.5 decades."""
    if len(n_grid) < 4:
        raise ValidationError(
            f"rate studies need at least 4 grid points, got {len(n_grid)}"
        )
    span = np.log10(n_grid[-1] / n_grid[0])
    if span < 1.5:
        raise ValidationError(
            f"rate studies need a grid spanning at least 1.5 decades, got {span:.2f}"
        )


def decay_rate_study(config: StudyConfig, n_jobs: int = 1) -> DecayReport:
    """Measure how fast the self-normalisation remainder vanishes."""
    if not isinstance(config.scenario, BanditScenario):
        raise ValidationError("the remainder decay study applies to scalar scenarios only")
    _check_rate_grid(config.n_grid)
    oracle = oracle_report(config.scenario)
    value = oracle.target("value").value
    specs = (MetricSpec("remainder-sq"),)
    targets = _metric_targets(specs, config.scenario, oracle)
    rows: list[StudyRow] = []
    failures: list[FailureRecord] = []
    for n in config.n_grid:
        matrix = replicate_estimates(
            config.scenario,
            n,
            config.replicates,
            config.master_seed,
            specs,
            oracle_value=value,
            n_jobs=n_jobs,
        )
        rows.extend(_rows_for_matrix(matrix, targets, config.replicates))
        failures.extend(matrix.failures)
    points = [(row.n, row.mean_estimate) for row in rows if row.mean_estimate > 0.0]
    dropped = tuple(row.n for row in rows if row.mean_estimate <= 0.0)
    if len(points) < 2:
        raise NonPositiveMean(len(points))
    slope, intercept = fit_loglog_slope(points)
    study = StudyReport(
        rows=tuple(rows),
        oracle=oracle,
        scenario_label=config.scenario_label,
        n_grid=config.n_grid,
        replicates=config.replicates,
        master_seed=config.master_seed,
        estimators=tuple(spec.label for spec in specs),
        folds=config.folds,
        failures=tuple(failures),
        weight_bound=scenario_weight_bound(config.scenario),
    )
    return DecayReport(
        study=study, true_value=value, slope=slope, intercept=intercept, dropped_cells=dropped
    )


@dataclass(frozen=True, eq=False)
class BiasRateReport:
    """Decay rate of an estimator's absolute bias over the sample size grid.

    For the self-normalised estimator the bias shrinks like 1/n, so the
    log-log slope sits near -1. Cells with exactly zero measured bias are
    dropped and listed.
    """

    study: StudyReport
    estimator: str
    slope: float
    intercept: float
    dropped_cells: tuple[int, ...]


def bias_rate_study(config: StudyConfig, n_jobs: int = 1) -> BiasRateReport:
    """Measure how fast an estimator's bias vanishes with the sample size."""
    if not isinstance(config.scenario, BanditScenario):
        raise ValidationError("the bias rate study applies to scalar scenarios only")
    _check_rate_grid(config.n_grid)
    estimators = config.estimators or ("snips",)
    if len(estimators) != 1:
        raise ValidationError("the bias rate study takes exactly one estimator")
    spec = parse_estimator_spec(estimators[0])
    _check_spec_kind(spec, config.scenario)
    oracle = oracle_report(config.scenario)
    targets = _metric_targets((spec,), config.scenario, oracle)
    rows: list[StudyRow] = []
    failures: list[FailureRecord] = []
    for n in config.n_grid:
        matrix = replicate_estimates(
            config.scenario,
            n,
            config.replicates,
            config.master_seed,
            (spec,),
            folds=config.folds,
            oracle_value=oracle.value,
            n_jobs=n_jobs,
        )
        rows.extend(_rows_for_matrix(matrix, targets, config.replicates))
        failures.extend(matrix.failures)
    points = [(row.n, abs(row.bias)) for row in rows if row.bias != 0.0]
    dropped = tuple(row.n for row in rows if row.bias == 0.0)
    if len(points) < 2:
        raise NonPositiveMean(len(points))
    slope, intercept = fit_loglog_slope(points)
    study = StudyReport(
        rows=tuple(rows),
        oracle=oracle,
        scenario_label=config.scenario_label,
        n_grid=config.n_grid,
        replicates=config.replicates,
        master_seed=config.master_seed,
        estimators=(spec.label,),
        folds=config.folds,
        failures=tuple(failures),
        weight_bound=scenario_weight_bound(config.scenario),
    )
    return BiasRateReport(
        study=study, estimator=spec.label, slope=slope, intercept=intercept, dropped_cells=dropped
    )
