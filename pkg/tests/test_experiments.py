"""Monte Carlo engine, statistics helpers, and study drivers."""

import numpy as np
import pytest

from opekit import (
    StudyConfig,
    bias_rate_study,
    decay_rate_study,
    dominance_check,
    fit_loglog_slope,
    get_scenario,
    ips,
    mse_decompose,
    oracle_report,
    paired_mse_difference,
    paired_variance_difference,
    population_moments,
    replicate_estimates,
    run_mc_study,
    sample_logs,
    snips,
)
from opekit.errors import (
    DegenerateX,
    ExcessiveFailureRate,
    NonPositiveMean,
    PreconditionNotMet,
    TooFewReplicates,
    UnknownEstimator,
    ValidationError,
)
from opekit.experiments import (
    MetricSpec,
    parse_estimator_spec,
    scenario_weight_bound,
)
from opekit.simulator import BanditEnv, BanditScenario, PolicyTable


def zero_reward_scenario() -> BanditScenario:
    """Flip policies over arms that never pay; every estimate is exactly zero."""
    return BanditScenario(
        env=BanditEnv(context_probs=[1.0], reward_means=[[0.0, 0.0]]),
        logging_policy=PolicyTable([[0.9, 0.1]]),
        target_policy=PolicyTable([[0.1, 0.9]]),
    )


class TestSpecParsing:
    def test_plain_names(self):
        for name in ("ips", "snips", "beta-star-ips", "cf-beta-star-ips", "remainder-sq",
                     "ipm", "snipm", "beta-perp-star-ipm"):
            spec = parse_estimator_spec(name)
            assert spec == MetricSpec(name)
            assert spec.label == name

    def test_parameterised(self):
        spec = parse_estimator_spec("beta-ips:0.5")
        assert spec.name == "beta-ips"
        assert spec.params == (0.5,)
        assert spec.label == "beta-ips:0.5"
        ranked = parse_estimator_spec("beta-ipm:0,0.25")
        assert ranked.params == (0.0, 0.25)

    def test_whitespace_tolerated(self):
        assert parse_estimator_spec("  snips ") == MetricSpec("snips")

    def test_idempotent(self):
        spec = MetricSpec("ips")
        assert parse_estimator_spec(spec) is spec

    def test_rejections(self):
        for bad in ("nope", "ips:1", "beta-ips", "beta-ips:", "beta-ips:x", "beta-ips:1,2"):
            with pytest.raises(UnknownEstimator):
                parse_estimator_spec(bad)


class TestReplicateEngine:
    def test_seeding_contract(self):
        scenario = get_scenario("flip2")
        matrix = replicate_estimates(scenario, 60, 40, 9, ("ips", "snips"))
        assert matrix.labels == ("ips", "snips")
        assert matrix.values.shape == (40, 2)
        assert matrix.failures == ()
        for r in (0, 17, 39):
            d = sample_logs(
                scenario.env,
                scenario.logging_policy,
                scenario.target_policy,
                60,
                np.random.SeedSequence((9, 60, r)),
            )
            assert matrix.values[r, 0] == ips(d).value
            assert matrix.values[r, 1] == snips(d).value

    def test_parallel_matches_serial(self):
        scenario = get_scenario("flip2")
        serial = replicate_estimates(scenario, 50, 30, 4, ("ips", "beta-star-ips"))
        parallel = replicate_estimates(
            scenario, 50, 30, 4, ("ips", "beta-star-ips"), n_jobs=2
        )
        assert np.array_equal(serial.values, parallel.values)

    def test_estimator_list_does_not_change_columns(self):
        scenario = get_scenario("flip2")
        both = replicate_estimates(scenario, 40, 25, 6, ("ips", "snips"))
        only = replicate_estimates(scenario, 40, 25, 6, ("snips",))
        assert np.array_equal(both.column("snips"), only.column("snips"))

    def test_ranked_labels_and_totals(self):
        env = get_scenario("rankflip2x2")
        matrix = replicate_estimates(env, 50, 20, 3, ("snipm",))
        assert matrix.labels == ("snipm[pos1]", "snipm[pos2]", "snipm[total]")
        totals = matrix.column("snipm[pos1]") + matrix.column("snipm[pos2]")
        assert np.allclose(matrix.column("snipm[total]"), totals, rtol=1e-12)

    def test_unknown_column(self):
        matrix = replicate_estimates(get_scenario("flip2"), 40, 20, 0, ("ips",))
        with pytest.raises(ValidationError):
            matrix.column("snips")

    def test_kind_mismatch(self):
        with pytest.raises(UnknownEstimator):
            replicate_estimates(get_scenario("flip2"), 40, 20, 0, ("snipm",))
        with pytest.raises(UnknownEstimator):
            replicate_estimates(get_scenario("rankflip2x2"), 40, 20, 0, ("snips",))

    def test_argument_validation(self):
        scenario = get_scenario("flip2")
        with pytest.raises(TooFewReplicates):
            replicate_estimates(scenario, 40, 1, 0, ("ips",))
        with pytest.raises(ValidationError):
            replicate_estimates(scenario, 0, 20, 0, ("ips",))
        with pytest.raises(ValidationError):
            replicate_estimates(scenario, 40, 20, -1, ("ips",))
        with pytest.raises(ValidationError):
            replicate_estimates(scenario, 40, 20, 0, ())
        with pytest.raises(ValidationError):
            replicate_estimates(scenario, 40, 20, 0, ("ips",), n_jobs=0)

    def test_failures_become_nan_rows(self):
        matrix = replicate_estimates(get_scenario("identity2"), 30, 20, 0, ("ips", "beta-star-ips"))
        assert np.isfinite(matrix.column("ips")).all()
        assert np.isnan(matrix.column("beta-star-ips")).all()
        assert len(matrix.failures) == 20
        record = matrix.failures[0]
        assert record.metric == "beta-star-ips"
        assert record.error == "DegenerateWeights"


class TestStatisticsHelpers:
    def test_mse_decompose_centered(self):
        bias, variance, mse = mse_decompose([0.4, 0.6], 0.5)
        assert bias == 0.0
        assert variance == pytest.approx(0.01, rel=1e-12)
        assert mse == pytest.approx(0.01, rel=1e-12)

    def test_mse_decompose_pure_bias(self):
        bias, variance, mse = mse_decompose([0.5, 0.5], 0.3)
        assert bias == pytest.approx(0.2, rel=1e-15)
        assert variance == 0.0
        assert mse == pytest.approx(0.04, rel=1e-12)

    def test_mse_decompose_closure(self):
        rng = np.random.default_rng(1)
        values = rng.normal(0.3, 0.2, size=500)
        bias, variance, mse = mse_decompose(values, 0.25)
        assert mse == pytest.approx(bias * bias + variance, rel=1e-10)

    def test_mse_decompose_validation(self):
        with pytest.raises(TooFewReplicates):
            mse_decompose([0.5], 0.5)
        with pytest.raises(ValidationError):
            mse_decompose([0.5, float("nan")], 0.5)
        with pytest.raises(ValidationError):
            mse_decompose([[0.5, 0.5]], 0.5)

    def test_paired_mse_difference(self):
        diff, se = paired_mse_difference([0.0, 1.0], [1.0, 3.0], 0.0)
        assert diff == pytest.approx(4.5, rel=1e-15)
        assert se == pytest.approx(3.5, rel=1e-12)
        same, zero = paired_mse_difference([0.2, 0.4], [0.2, 0.4], 0.1)
        assert same == 0.0
        assert zero == 0.0

    def test_paired_variance_difference(self):
        diff, se = paired_variance_difference([0.0, 2.0], [0.0, 4.0])
        assert diff == pytest.approx(3.0, rel=1e-15)
        assert se == 0.0

    def test_paired_validation(self):
        with pytest.raises(ValidationError):
            paired_mse_difference([0.1, 0.2], [0.1], 0.0)
        with pytest.raises(TooFewReplicates):
            paired_variance_difference([0.1], [0.2])

    def test_loglog_slope(self):
        slope, _ = fit_loglog_slope([(10.0, 4e-2), (100.0, 4e-4)])
        assert slope == pytest.approx(-2.0, rel=1e-12)
        flat, intercept = fit_loglog_slope([(1.0, 5.0), (10.0, 5.0)])
        assert flat == pytest.approx(0.0, abs=1e-12)
        assert intercept == pytest.approx(np.log(5.0), rel=1e-12)

    def test_loglog_rejections(self):
        for points in ([(1.0, 1.0)], [(2.0, 1.0), (2.0, 3.0)], [(1.0, -1.0), (2.0, 1.0)],
                       [(0.0, 1.0), (2.0, 1.0)]):
            with pytest.raises(DegenerateX):
                fit_loglog_slope(points)


class TestOracleReport:
    def test_flip2(self):
        scenario = get_scenario("flip2")
        report = oracle_report(scenario)
        target = report.target("value")
        assert target.value == pytest.approx(0.26, rel=1e-15)
        assert target.beta_star == pytest.approx(0.1925, rel=1e-12)
        assert target.delta_per_sample == pytest.approx(0.0324, rel=1e-10)
        assert target.avar_snips - target.var_beta_star == pytest.approx(
            target.delta_per_sample, rel=1e-10
        )
        expected = population_moments(
            scenario.env, scenario.logging_policy, scenario.target_policy
        )
        assert target.moments == expected
        assert report.value == target.value

    def test_identity2_has_no_baseline(self):
        target = oracle_report(get_scenario("identity2")).target("value")
        assert target.value == pytest.approx(0.74, rel=1e-15)
        assert target.beta_star is None
        assert target.avar_snips is None
        assert target.delta_per_sample is None
        assert target.moments.var_w == 0.0

    def test_ranking_targets(self):
        report = oracle_report(get_scenario("rankflip2x2"))
        assert [t.label for t in report.targets] == ["pos1", "pos2", "total"]
        assert report.target("pos1").value == pytest.approx(0.26)
        total = report.target("total")
        assert total.value == pytest.approx(0.52, rel=1e-12)
        assert total.moments is None
        assert total.beta_star is None
        assert report.value == pytest.approx(0.52, rel=1e-12)

    def test_unknown_target(self):
        with pytest.raises(ValidationError):
            oracle_report(get_scenario("flip2")).target("pos9")


class TestStudyConfig:
    def test_validation(self):
        scenario = get_scenario("flip2")
        with pytest.raises(ValidationError):
            StudyConfig(scenario, "flip2", (), 100, 0)
        with pytest.raises(ValidationError):
            StudyConfig(scenario, "flip2", (100, 50), 100, 0)
        with pytest.raises(ValidationError):
            StudyConfig(scenario, "flip2", (50, 100), 99, 0)
        with pytest.raises(ValidationError):
            StudyConfig(scenario, "flip2", (50,), 100, -1)
        with pytest.raises(ValidationError):
            StudyConfig(scenario, "flip2", (50,), 100, 0, folds=1)
        with pytest.raises(ValidationError):
            StudyConfig("flip2", "flip2", (50,), 100, 0)

    def test_weight_bound_helper(self):
        assert scenario_weight_bound(get_scenario("flip2")) == pytest.approx(9.0, rel=1e-12)
        assert scenario_weight_bound(get_scenario("rankflip2x2")) == pytest.approx(9.0, rel=1e-12)


class TestMcStudy:
    def config(self, **overrides):
        base = dict(
            scenario=get_scenario("flip2"),
            scenario_label="flip2",
            n_grid=(50, 100),
            replicates=200,
            master_seed=12,
            estimators=("ips", "snips", "beta-star-ips"),
        )
        base.update(overrides)
        return StudyConfig(**base)

    def test_rows_and_metadata(self):
        report = run_mc_study(self.config())
        assert len(report.rows) == 6
        assert [row.n for row in report.rows] == [50, 50, 50, 100, 100, 100]
        for row in report.rows:
            assert row.oracle_value == pytest.approx(0.26, rel=1e-15)
            assert row.n_used == 200
            assert row.n_failed == 0
            assert row.mse == pytest.approx(row.bias**2 + row.variance, rel=1e-10)
            assert row.std_error > 0
        assert report.weight_bound == pytest.approx(9.0, rel=1e-12)
        assert report.estimators == ("ips", "snips", "beta-star-ips")

    def test_reproducible_across_runs_and_workers(self):
        first = run_mc_study(self.config())
        second = run_mc_study(self.config())
        parallel = run_mc_study(self.config(), n_jobs=2)
        assert first.rows == second.rows == parallel.rows

    def test_needs_estimators(self):
        with pytest.raises(ValidationError):
            run_mc_study(self.config(estimators=()))

    def test_excessive_failures_abort(self):
        config = StudyConfig(
            scenario=get_scenario("identity2"),
            scenario_label="identity2",
            n_grid=(50,),
            replicates=100,
            master_seed=0,
            estimators=("beta-star-ips",),
        )
        with pytest.raises(ExcessiveFailureRate) as info:
            run_mc_study(config)
        assert info.value.metric == "beta-star-ips"
        assert info.value.failed == 100


class TestDominance:
    def test_flip2_structure(self):
        config = StudyConfig(
            scenario=get_scenario("flip2"),
            scenario_label="flip2",
            n_grid=(200, 400),
            replicates=300,
            master_seed=21,
        )
        report = dominance_check(config)
        assert [c.n for c in report.cells] == [200, 400]
        for cell in report.cells:
            assert cell.target == "value"
            assert cell.n_pairs == 300
            assert cell.mse_difference == pytest.approx(
                cell.mse_self_normalised - cell.mse_optimal, rel=1e-10
            )
            assert cell.dominant == (cell.mse_difference > 2.0 * cell.se_difference)
        assert set(report.smallest_dominant_n) == {"value"}
        assert report.study.estimators == ("beta-star-ips", "snips")

    def test_ranked_targets(self):
        config = StudyConfig(
            scenario=get_scenario("rankflip2x2"),
            scenario_label="rankflip2x2",
            n_grid=(150,),
            replicates=150,
            master_seed=2,
        )
        report = dominance_check(config)
        assert sorted(c.target for c in report.cells) == ["pos1", "pos2"]
        assert set(report.smallest_dominant_n) == {"pos1", "pos2"}

    def test_preconditions(self):
        for preset in ("const2", "identity2"):
            config = StudyConfig(
                scenario=get_scenario(preset),
                scenario_label=preset,
                n_grid=(100,),
                replicates=100,
                master_seed=0,
            )
            with pytest.raises(PreconditionNotMet):
                dominance_check(config)


class TestRateStudies:
    def rate_config(self, scenario, label, **overrides):
        base = dict(
            scenario=scenario,
            scenario_label=label,
            n_grid=(100, 200, 400, 3200),
            replicates=150,
            master_seed=8,
        )
        base.update(overrides)
        return StudyConfig(**base)

    def test_decay_slope_near_minus_two(self):
        report = decay_rate_study(self.rate_config(get_scenario("flip2"), "flip2"))
        assert report.true_value == pytest.approx(0.26, rel=1e-15)
        assert -3.0 < report.slope < -1.0
        assert report.dropped_cells == ()
        assert report.study.estimators == ("remainder-sq",)

    def test_grid_preconditions(self):
        scenario = get_scenario("flip2")
        short = self.rate_config(scenario, "flip2", n_grid=(100, 200, 400))
        with pytest.raises(ValidationError):
            decay_rate_study(short)
        narrow = self.rate_config(scenario, "flip2", n_grid=(100, 200, 400, 800))
        with pytest.raises(ValidationError):
            bias_rate_study(narrow)

    def test_scalar_only(self):
        config = self.rate_config(get_scenario("rankflip2x2"), "rankflip2x2")
        with pytest.raises(ValidationError):
            decay_rate_study(config)
        with pytest.raises(ValidationError):
            bias_rate_study(config)

    def test_bias_rate_runs(self):
        report = bias_rate_study(self.rate_config(get_scenario("flip2"), "flip2"))
        assert report.estimator == "snips"
        assert np.isfinite(report.slope)
        assert len(report.study.rows) == 4

    def test_bias_rate_single_estimator_only(self):
        config = self.rate_config(
            get_scenario("flip2"), "flip2", estimators=("ips", "snips")
        )
        with pytest.raises(ValidationError):
            bias_rate_study(config)

    def test_zero_signal_cells_dropped_until_error(self):
        config = self.rate_config(zero_reward_scenario(), "zero")
        with pytest.raises(NonPositiveMean):
            decay_rate_study(config)
        with pytest.raises(NonPositiveMean):
            bias_rate_study(config)
