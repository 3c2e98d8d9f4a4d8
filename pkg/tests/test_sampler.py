import math

import numpy as np
import pytest

from teacache import rng
from teacache import sampler as sm
from teacache.errors import BadRange, ShapeMismatch
from teacache.policy import Decision, PolicyConfig, TeaCachePolicy, never_recompute_config
from teacache.tensor import checksum

GOLDEN_DENOISE_T10 = -23.300228027322746
GOLDEN_BASELINE_SEED0 = 500.20541560272244


class TestSchedule:
    def test_constant_betas(self):
        s = sm.linear_beta_schedule(2, 0.1, 0.1)
        np.testing.assert_allclose(s.alphas, [0.9, 0.9], rtol=0, atol=1e-15)
        np.testing.assert_allclose(s.alpha_bars, [0.9, 0.81], rtol=0, atol=1e-15)

    @pytest.mark.parametrize("T,b0,b1", [(2, 1e-4, 0.02), (30, 0.01, 0.3), (100, 0.001, 0.5)])
    def test_alpha_bars_strictly_decreasing(self, T, b0, b1):
        s = sm.linear_beta_schedule(T, b0, b1)
        assert len(s.alphas) == T
        assert np.all(np.diff(s.alpha_bars) < 0)
        assert np.all((s.alphas > 0) & (s.alphas < 1))

    @pytest.mark.parametrize("T,b0,b1", [(10, 0.2, 0.1), (1, 0.1, 0.2), (10, 0.0, 0.1), (10, 0.1, 1.0)])
    def test_bad_range(self, T, b0, b1):
        with pytest.raises(BadRange):
            sm.linear_beta_schedule(T, b0, b1)

    def test_endpoints_inclusive(self):
        s = sm.linear_beta_schedule(5, 0.1, 0.3)
        assert 1 - s.alphas[0] == pytest.approx(0.1)
        assert 1 - s.alphas[-1] == pytest.approx(0.3)


class TestForwardDiffuse:
    def test_zero_noise(self):
        s = sm.NoiseSchedule.from_alphas([0.64, 0.5])
        x = np.array([1.0, -2.0])
        np.testing.assert_allclose(sm.forward_diffuse(x, 1, s, np.zeros(2)), 0.8 * x)

    def test_alpha_near_one(self):
        s = sm.NoiseSchedule.from_alphas([1 - 1e-12, 0.5])
        x = rng.gaussian_tensor(3, (4, 4))
        out = sm.forward_diffuse(x, 1, s, rng.gaussian_tensor(4, (4, 4)))
        assert np.max(np.abs(out - x)) < 1e-5

    def test_hand_value(self):
        s = sm.NoiseSchedule.from_alphas([0.75, 0.5])
        out = sm.forward_diffuse([1.0, 0.0], 1, s, [0.0, 2.0])
        np.testing.assert_allclose(out, [math.sqrt(0.75), 1.0], rtol=1e-15)

    def test_shape_mismatch(self):
        s = sm.NoiseSchedule.from_alphas([0.75, 0.5])
        with pytest.raises(ShapeMismatch):
            sm.forward_diffuse([1.0], 1, s, [0.0, 2.0])


class TestDenoiseStep:
    schedule = sm.linear_beta_schedule(10, 0.01, 0.3)

    def test_zero_prediction(self):
        x = rng.gaussian_tensor(1, (3, 4))
        t = 6
        out = sm.denoise_step(x, np.zeros_like(x), t, self.schedule)
        ratio = math.sqrt(self.schedule.alpha_bar(t - 1) / self.schedule.alpha_bar(t))
        np.testing.assert_allclose(out, ratio * x, rtol=1e-14)

    @pytest.mark.parametrize("t", [1, 4, 10])
    def test_exact_eps_recovers_x0(self, t):
        x0 = rng.gaussian_tensor(2, (5, 3))
        eps = rng.gaussian_tensor(3, (5, 3))
        ab = self.schedule.alpha_bar(t)
        x_t = math.sqrt(ab) * x0 + math.sqrt(1 - ab) * eps
        np.testing.assert_allclose(sm.predict_x0(x_t, eps, t, self.schedule), x0, rtol=0, atol=1e-10)
        if t == 1:
            np.testing.assert_allclose(sm.denoise_step(x_t, eps, t, self.schedule), x0, rtol=0, atol=1e-10)

    def test_golden(self):
        xt = rng.gaussian_tensor(11, (16, 8))
        eps = rng.gaussian_tensor(12, (16, 8))
        assert checksum(sm.denoise_step(xt, eps, 7, self.schedule)) == pytest.approx(GOLDEN_DENOISE_T10, rel=1e-10)

    def test_errors(self):
        with pytest.raises(ShapeMismatch):
            sm.denoise_step(np.zeros(3), np.zeros(4), 2, self.schedule)
        with pytest.raises(BadRange):
            sm.denoise_step(np.zeros(3), np.zeros(3), 0, self.schedule)


class TestRunSampler:
    def test_baseline_golden(self, weights, schedule):
        res = sm.run_sampler(weights, sm.SamplerConfig(schedule, 0))
        assert checksum(res.latent) == pytest.approx(GOLDEN_BASELINE_SEED0, rel=1e-9)
        assert res.stats.computed_steps == schedule.T
        assert res.stats.total_model_evals == schedule.T
        assert res.stats.noise_seed == 0

    def test_delta_zero_matches_baseline_stepwise(self, weights, schedule, cond):
        cfg = sm.SamplerConfig(schedule, 3, record_trajectory=True)
        base = sm.run_sampler(weights, cfg, None, cond)
        tea = sm.run_sampler(weights, cfg, TeaCachePolicy(PolicyConfig(0.0)), cond)
        assert np.array_equal(base.latent, tea.latent)
        for a, b in zip(base.trajectory, tea.trajectory):
            assert a.t == b.t
            assert np.array_equal(a.x_t, b.x_t)
            assert np.array_equal(a.output, b.output)

    def test_never_recompute(self, weights, schedule, cond):
        res = sm.run_sampler(weights, sm.SamplerConfig(schedule, 1), TeaCachePolicy(never_recompute_config()), cond)
        assert res.stats.computed_steps == 1
        assert res.stats.reused_steps == schedule.T - 1
        assert res.stats.per_step_decisions[0] == (schedule.T - 1, Decision.REFRESH)

    def test_delta_01_is_partial(self, weights, schedule, cond):
        res = sm.run_sampler(weights, sm.SamplerConfig(schedule, 0), TeaCachePolicy(PolicyConfig(0.1)), cond)
        assert 1 < res.stats.computed_steps < schedule.T
        assert res.stats.computed_steps == 6
        assert res.stats.total_model_evals == res.stats.computed_steps
        assert res.stats.computed_steps + res.stats.reused_steps == schedule.T
        assert res.stats.flops_proxy == res.stats.total_model_evals * res.stats.flops_per_eval

    def test_trajectory_records(self, weights, schedule, cond):
        res = sm.run_sampler(weights, sm.SamplerConfig(schedule, 2, True), TeaCachePolicy(PolicyConfig(0.1)), cond)
        traj = res.trajectory
        assert len(traj) == schedule.T
        assert [r.t for r in traj] == list(range(schedule.T - 1, -1, -1))
        assert traj[0].decision is Decision.REFRESH
        assert traj[0].indicator_diff is None
        assert all(r.indicator_diff is not None for r in traj[1:])
        assert all((r.true_output_diff is None) == (r.decision is Decision.REUSE) for r in traj[1:])

    def test_monotone_in_delta(self, weights, schedule, cond):
        counts = [
            sm.run_sampler(weights, sm.SamplerConfig(schedule, 4), TeaCachePolicy(PolicyConfig(d)), cond).stats.computed_steps
            for d in (0.0, 0.02, 0.05, 0.1, 0.2, 0.5)
        ]
        assert counts == sorted(counts, reverse=True)

    def test_determinism(self, weights, schedule, cond):
        cfg = sm.SamplerConfig(schedule, 9, True)
        a = sm.run_sampler(weights, cfg, TeaCachePolicy(PolicyConfig(0.15)), cond)
        b = sm.run_sampler(weights, cfg, TeaCachePolicy(PolicyConfig(0.15)), cond)
        assert np.array_equal(a.latent, b.latent)
        assert a.stats.per_step_decisions == b.stats.per_step_decisions
        for ra, rb in zip(a.trajectory, b.trajectory):
            assert (ra.indicator_diff, ra.accumulator, ra.true_output_diff) == (rb.indicator_diff, rb.accumulator, rb.true_output_diff)

    def test_duplicated_timesteps_are_representable(self, weights, cond):
        s = sm.NoiseSchedule.from_alphas([0.9, 0.9, 0.8, 0.8])
        res = sm.run_sampler(weights, sm.SamplerConfig(s, 0), None, cond)
        assert np.all(np.isfinite(res.latent))


def test_trajectory_csv(weights, schedule, cond, tmp_path):
    res = sm.run_sampler(weights, sm.SamplerConfig(schedule, 0, True), TeaCachePolicy(PolicyConfig(0.1)), cond)
    path = tmp_path / "traj.csv"
    sm.write_trajectory_csv(res.trajectory, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,decision,indicator_diff,rescaled_diff,accumulator,true_output_diff"
    assert len(lines) == schedule.T + 1
    assert lines[1].startswith(f"{schedule.T - 1},computed,,,0.0,")
