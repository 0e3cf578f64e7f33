import dataclasses
import io
import math

import numpy as np
import pytest
from scipy import stats as sps

from conftest import bilinear_model, two_regime_model
from sirswitch.ctmc import validate_generator
from sirswitch.engine import (
    HybridPath,
    InitOutsideRegion,
    NonFiniteState,
    SimConfig,
    em_step,
    log_infected_step,
    path_rng,
    simulate_path,
    write_path_csv,
)
from sirswitch.model import EpidemicState, Incidence, SirsModel, SwitchingSde, as_switching_sde


def scalar_sde(a=0.0, b=0.0):
    """dX = a X dt + b X dW, single regime."""
    return SwitchingSde(dim=1, m0=1,
                        drift=lambda v, i: a * v,
                        diffusion=lambda v, i: b * v)


SINGLE = validate_generator([[0.0]])


class TestEmStep:
    def test_zero_coefficients_leave_state(self):
        sde = scalar_sde(0.0, 0.0)
        out = em_step(sde, np.array([2.0]), 0, 0.1, 0.3)
        assert out[0] == 2.0

    def test_dw_zero_is_forward_euler(self):
        sde = scalar_sde(a=0.5, b=1.0)
        out = em_step(sde, np.array([2.0]), 0, 0.1, 0.0)
        assert out[0] == pytest.approx(2.0 + 0.5 * 2.0 * 0.1, abs=1e-15)

    def test_scalar_hand_value(self):
        sde = scalar_sde(a=0.1, b=0.2)
        out = em_step(sde, np.array([1.0]), 0, 0.01, 0.05)
        assert out[0] == pytest.approx(1.011, abs=1e-15)

    def test_clipping(self):
        sde = dataclasses.replace(scalar_sde(a=-100.0), clip_nonnegative=(0,))
        out = em_step(sde, np.array([1.0]), 0, 0.1, 0.0)
        assert out[0] == 0.0

    def test_nonfinite_raises(self):
        sde = scalar_sde(a=float("inf"))
        with pytest.raises(NonFiniteState):
            em_step(sde, np.array([1.0]), 0, 0.1, 0.0)


class TestLogInfectedStep:
    def test_linear_decay_for_vanishing_incidence(self):
        # incidence small enough to vanish at double precision
        tiny = Incidence.custom(lambda S, I: 1e-160 + 0.0 * S)
        m = SirsModel(K=1.0, mu=[0.1], rho=[0.05], gamma1=[0.2], gamma2=[0.05],
                      f1=(tiny,), f2=(tiny,), chain=SINGLE)
        state = EpidemicState(0.5, 0.2, 0.1, 0)
        rng = np.random.default_rng(0)
        lnI0 = math.log(state.I)
        for _ in range(100):
            state = log_infected_step(m, state, 0.01, rng.normal(0, 0.1))
        assert math.log(state.I) == pytest.approx(lnI0 - 0.2 * 1.0, abs=1e-12)

    def test_hand_value(self, model_028):
        state = EpidemicState(1.0, 0.2, 0.0, 0)
        out = log_infected_step(model_028, state, 0.01, 0.0)
        assert math.log(out.I) - math.log(0.2) == pytest.approx(0.0028, abs=1e-15)

    def test_infected_stays_positive(self, model_028):
        state = EpidemicState(0.5, 1e-8, 0.1, 0)
        out = log_infected_step(model_028, state, 0.01, -5.0)
        assert out.I > 0

    def test_consistency_with_em_step(self, model_028):
        # with the Ito correction removed, log step and EM step agree to O(dt^2)
        sde = as_switching_sde(model_028)
        rng = np.random.default_rng(3)
        for _ in range(20):
            S, I, R = rng.uniform(0.05, 0.4, size=3)
            state = EpidemicState(S, I, R, 0)
            diffs = []
            dts = [1e-3, 5e-4, 2.5e-4]
            for dt in dts:
                log_I = log_infected_step(model_028, state, dt, 0.0).I
                em_I = em_step(sde, state.as_vector(), 0, dt, 0.0)[1]
                F2 = model_028.f2[0](S, I)
                ito = -0.5 * I * (S * F2) ** 2 * dt
                diffs.append(abs(log_I - (em_I + ito)))
            order = np.polyfit(np.log(dts), np.log(np.maximum(diffs, 1e-300)), 1)[0]
            assert order > 1.9


class TestSimulatePath:
    def test_same_seed_identical(self, model_028):
        cfg = SimConfig(dt=1e-3, horizon=5.0, seed=11, record_stride=100, log_infected=True)
        sde = as_switching_sde(model_028)
        p1 = simulate_path(sde, model_028.chain, [0.7, 0.2, 0.1], 0, cfg)
        p2 = simulate_path(sde, model_028.chain, [0.7, 0.2, 0.1], 0, cfg)
        np.testing.assert_array_equal(p1.states, p2.states)
        np.testing.assert_array_equal(p1.log_infected, p2.log_infected)
        np.testing.assert_array_equal(p1.regime_path.jump_times, p2.regime_path.jump_times)

    def test_kernel_matches_python_reference(self, model_028):
        cfg = SimConfig(dt=1e-3, horizon=5.0, seed=11, record_stride=100, log_infected=True)
        sde = as_switching_sde(model_028)
        fast = simulate_path(sde, model_028.chain, [0.7, 0.2, 0.1], 0, cfg)
        slow_sde = dataclasses.replace(sde, model=None)  # forces the Python loop
        slow = simulate_path(slow_sde, model_028.chain, [0.7, 0.2, 0.1], 0, cfg)
        np.testing.assert_allclose(fast.states, slow.states, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(fast.log_infected, slow.log_infected, rtol=1e-10)

    def test_two_regime_kernel_matches_python(self):
        m = two_regime_model()
        cfg = SimConfig(dt=1e-3, horizon=10.0, seed=5, record_stride=50, log_infected=True)
        sde = as_switching_sde(m)
        fast = simulate_path(sde, m.chain, [0.7, 0.2, 0.1], 0, cfg)
        slow = simulate_path(dataclasses.replace(sde, model=None), m.chain,
                             [0.7, 0.2, 0.1], 0, cfg)
        np.testing.assert_allclose(fast.states, slow.states, rtol=1e-9, atol=1e-12)

    def test_drift_only_matches_ode_oracle(self, model_028):
        # zero noise: compare against RK4 at dt/100
        m = bilinear_model(sigma=1e-300)
        cfg = SimConfig(dt=1e-2, horizon=5.0, seed=1, record_stride=500, log_infected=False)
        path = simulate_path(as_switching_sde(m), m.chain, [0.7, 0.2, 0.1], 0, cfg)

        def f(v):
            from sirswitch.model import sirs_drift
            return sirs_drift(m, EpidemicState(v[0], v[1], v[2], 0))

        v = np.array([0.7, 0.2, 0.1])
        h = 1e-4
        for _ in range(int(5.0 / h)):
            k1 = f(v); k2 = f(v + h / 2 * k1); k3 = f(v + h / 2 * k2); k4 = f(v + h * k3)
            v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        np.testing.assert_allclose(path.states[-1], v, atol=5e-3)

    def test_truncation_of_last_record(self, model_028):
        cfg = SimConfig(dt=0.1, horizon=1.05, seed=1, record_stride=1, log_infected=True)
        path = simulate_path(as_switching_sde(model_028), model_028.chain,
                             [0.7, 0.2, 0.1], 0, cfg)
        assert path.times[-1] == pytest.approx(1.0)

    def test_init_outside_region(self, model_028):
        cfg = SimConfig(dt=0.1, horizon=1.0, seed=1)
        with pytest.raises(InitOutsideRegion):
            simulate_path(as_switching_sde(model_028), model_028.chain,
                          [0.9, 0.3, 0.2], 0, cfg)

    def test_log_infected_requires_positive_I(self, model_028):
        cfg = SimConfig(dt=0.1, horizon=1.0, seed=1, log_infected=True)
        with pytest.raises(InitOutsideRegion):
            simulate_path(as_switching_sde(model_028), model_028.chain,
                          [0.7, 0.0, 0.1], 0, cfg)

    def test_nonfinite_detection(self):
        # explosive drift with a huge step overflows to inf
        sde = scalar_sde(a=1.0)
        cfg = SimConfig(dt=1e3, horizon=3e5, seed=1)
        with np.errstate(over="ignore"), pytest.raises(NonFiniteState):
            simulate_path(sde, SINGLE, [1.0], 0, cfg)

    def test_absorbency_at_I_zero(self, model_028):
        cfg = SimConfig(dt=1e-3, horizon=10.0, seed=2, record_stride=100, log_infected=False)
        path = simulate_path(as_switching_sde(model_028), model_028.chain,
                             [0.7, 0.0, 0.3], 0, cfg)
        np.testing.assert_array_equal(path.states[:, 1], np.zeros(len(path.times)))

    def test_record_stride_subsamples_same_path(self, model_028):
        sde = as_switching_sde(model_028)
        fine = simulate_path(sde, model_028.chain, [0.7, 0.2, 0.1], 0,
                             SimConfig(dt=1e-2, horizon=2.0, seed=9, record_stride=1,
                                       log_infected=True))
        coarse = simulate_path(sde, model_028.chain, [0.7, 0.2, 0.1], 0,
                               SimConfig(dt=1e-2, horizon=2.0, seed=9, record_stride=10,
                                         log_infected=True))
        np.testing.assert_array_equal(coarse.states, fine.states[::10])

    def test_grid_phase_does_not_change_law(self):
        # two incommensurate step sizes give statistically equal S(T)
        m = two_regime_model()
        sde = as_switching_sde(m)
        means = []
        ses = []
        for dt in (1e-3, 7.8125e-4):
            cfg_n = int(20.0 / dt)
            terminal = []
            for p in range(100):
                cfg = SimConfig(dt=dt, horizon=cfg_n * dt, seed=404, record_stride=cfg_n,
                                log_infected=True)
                path = simulate_path(sde, m.chain, [0.7, 0.2, 0.1], 0, cfg,
                                     path_rng(404 + int(dt * 1e7), p))
                terminal.append(path.states[-1, 0])
            terminal = np.asarray(terminal)
            means.append(terminal.mean())
            ses.append(terminal.std(ddof=1) / 10.0)
        assert abs(means[0] - means[1]) < 3 * math.hypot(*ses)

    def test_brownian_increment_variance_chi_square(self):
        # dX = dW: recover pooled increments from the path, 1% chi-square check
        sde = SwitchingSde(dim=1, m0=1,
                           drift=lambda v, i: np.zeros(1),
                           diffusion=lambda v, i: np.ones(1))
        n = 2000
        dt = 0.01
        cfg = SimConfig(dt=dt, horizon=n * dt, seed=22)
        path = simulate_path(sde, SINGLE, [0.0], 0, cfg)
        incs = np.diff(path.states[:, 0])
        stat = np.sum(incs ** 2) / dt
        lo, hi = sps.chi2.ppf([0.005, 0.995], df=n)
        assert lo < stat < hi

    def test_delta_violation_diagnostic_small(self, model_028):
        cfg = SimConfig(dt=1e-3, horizon=20.0, seed=3, record_stride=1, log_infected=True)
        path = simulate_path(as_switching_sde(model_028), model_028.chain,
                             [0.5, 0.4, 0.1], 0, cfg)  # starts on the boundary
        assert path.max_excess <= 10 * 1e-3
        assert path.max_negative == 0.0


class TestCsvExport:
    def _path(self, model):
        cfg = SimConfig(dt=0.1, horizon=1.0, seed=4, log_infected=True)
        return simulate_path(as_switching_sde(model), model.chain, [0.7, 0.2, 0.1], 0, cfg)

    def test_header_and_columns(self, model_028):
        buf = io.StringIO()
        write_path_csv(self._path(model_028), buf, metadata={"seed": 4})
        lines = buf.getvalue().splitlines()
        assert lines[0] == "# seed=4"
        assert lines[1] == "t,regime,S,I,R,lnI"
        assert len(lines) == 2 + 11

    def test_rerun_is_byte_identical(self, model_028):
        bufs = []
        for _ in range(2):
            buf = io.StringIO()
            write_path_csv(self._path(model_028), buf)
            bufs.append(buf.getvalue())
        assert bufs[0] == bufs[1]
