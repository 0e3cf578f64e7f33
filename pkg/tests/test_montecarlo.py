import numpy as np
import pytest

from conftest import bilinear_model, two_regime_model
from sirswitch.ctmc import stationary_distribution, validate_generator
from sirswitch.engine import SimConfig
from sirswitch.model import Incidence, SirsModel
from sirswitch.montecarlo import (
    EnsembleStats,
    MissingLogChannel,
    MonteCarloError,
    PathResult,
    UnknownDelta,
    estimate_lyapunov,
    estimate_persistence,
    estimate_time_average,
    occupation_check,
    run_ensemble,
    stats_to_dict,
)


def small_cfg(**kw):
    defaults = dict(dt=1e-2, horizon=20.0, seed=77, record_stride=10, log_infected=True)
    defaults.update(kw)
    return SimConfig(**defaults)


class TestRunEnsemble:
    def test_deterministic_given_root_seed(self, model_028):
        a = run_ensemble(model_028, small_cfg(), 2, deltas=(1e-3,))
        b = run_ensemble(model_028, small_cfg(), 2, deltas=(1e-3,))
        np.testing.assert_array_equal(a.lyapunov_samples, b.lyapunov_samples)
        np.testing.assert_array_equal(a.terminal_infected, b.terminal_infected)

    def test_requires_two_paths(self, model_028):
        with pytest.raises(MonteCarloError):
            run_ensemble(model_028, small_cfg(), 1)

    def test_vanishing_incidence_exact_decay(self):
        tiny = Incidence.custom(lambda S, I: 1e-160 + 0.0 * S)
        m = SirsModel(K=1.0, mu=[0.1], rho=[0.05], gamma1=[0.2], gamma2=[0.05],
                      f1=(tiny,), f2=(tiny,), chain=validate_generator([[0.0]]))
        stats = run_ensemble(m, small_cfg(), 3)
        # ln I(T)/T = ln I(0)/T - (mu+rho+gamma2), exactly
        expected = np.log(0.2) / 20.0 - 0.2
        np.testing.assert_allclose(stats.lyapunov_samples, expected, atol=1e-12)

    def test_delta_zero_always_persists(self, model_028):
        stats = run_ensemble(model_028, small_cfg(), 4, deltas=(0.0,))
        freq, _ = estimate_persistence(stats, 0.0)
        assert freq == 1.0

    def test_delta_above_capacity_never_persists(self, model_028):
        stats = run_ensemble(model_028, small_cfg(), 4, deltas=(2.0,))
        freq, _ = estimate_persistence(stats, 2.0)
        assert freq == 0.0


class TestEstimators:
    def test_missing_log_channel(self, model_028):
        stats = run_ensemble(model_028, small_cfg(log_infected=False), 3)
        with pytest.raises(MissingLogChannel):
            estimate_lyapunov(stats)

    def test_unknown_delta(self, model_028):
        stats = run_ensemble(model_028, small_cfg(), 3, deltas=(1e-3,))
        with pytest.raises(UnknownDelta):
            estimate_persistence(stats, 0.5)

    def test_time_average_of_constant_synthetic_path(self):
        results = [
            PathResult(index=p, lyapunov=0.0, terminal_infected=0.3,
                       time_average_infected=0.3, occupation=np.array([1.0]),
                       max_excess=0.0, max_negative=0.0)
            for p in range(3)
        ]
        stats = EnsembleStats.from_results(results, horizon=10.0, deltas=())
        mean, se = estimate_time_average(stats)
        assert mean == pytest.approx(0.3, abs=1e-15)
        assert se == 0.0

    def test_occupation_single_regime_zero_error(self, model_028):
        stats = run_ensemble(model_028, small_cfg(), 3)
        pi = stationary_distribution(model_028.chain)
        assert occupation_check(stats, pi) == 0.0

    def test_occupation_dimension_mismatch(self, model_028):
        stats = run_ensemble(model_028, small_cfg(), 3)
        pi = stationary_distribution(validate_generator([[-1, 1], [2, -2]]))
        with pytest.raises(MonteCarloError):
            occupation_check(stats, pi)

    def test_occupation_two_regime_close_to_pi(self):
        m = two_regime_model()
        stats = run_ensemble(m, small_cfg(horizon=200.0, dt=0.05, record_stride=100), 50)
        pi = stationary_distribution(m.chain)
        assert occupation_check(stats, pi) < 0.05

    def test_extinction_time_average_decreases_with_horizon(self):
        m = bilinear_model(beta=0.2, gamma2=0.15)  # lambda = -0.12
        means = []
        for T in (100.0, 200.0, 400.0):
            stats = run_ensemble(m, small_cfg(horizon=T, dt=5e-3, record_stride=20), 20)
            means.append(estimate_time_average(stats)[0])
        assert means[0] > means[1] > means[2]


class TestMerging:
    def test_merge_order_insensitive(self, model_028):
        stats = run_ensemble(model_028, small_cfg(), 6, deltas=(1e-3,))
        results = [
            PathResult(index=p, lyapunov=float(stats.lyapunov_samples[p]),
                       terminal_infected=float(stats.terminal_infected[p]),
                       time_average_infected=float(stats.time_average_infected[p]),
                       occupation=stats.occupation[p],
                       max_excess=stats.max_excess, max_negative=stats.max_negative)
            for p in range(6)
        ]
        shuffled = [results[i] for i in (3, 0, 5, 1, 4, 2)]
        merged = EnsembleStats.from_results(shuffled, horizon=stats.horizon,
                                            deltas=stats.deltas, root_seed=stats.root_seed)
        assert stats_to_dict(merged) == stats_to_dict(stats)

    def test_duplicate_indices_rejected(self):
        r = PathResult(index=0, lyapunov=0.0, terminal_infected=0.1,
                       time_average_infected=0.1, occupation=np.array([1.0]),
                       max_excess=0.0, max_negative=0.0)
        with pytest.raises(MonteCarloError):
            EnsembleStats.from_results([r, r], horizon=1.0, deltas=())


class TestSummaries:
    def test_json_summary_fields(self, model_028):
        stats = run_ensemble(model_028, small_cfg(), 3, deltas=(1e-3,))
        doc = stats_to_dict(stats)
        assert doc["n_paths"] == 3
        assert "lyapunov" in doc["estimators"]
        assert doc["estimators"]["lyapunov"]["se"] >= 0
        (entry,) = doc["persistence"].values()
        assert 0.0 <= entry["frequency"] <= 1.0
