"""Tests for the Lorenz-96 dynamics, spin-up, and observation operator."""

import numpy as np
import pytest

from filterstab.exceptions import (
    ConfigurationError,
    DivergenceError,
    InvalidStateError,
)
from filterstab.lorenz96 import (
    ModelConfig,
    ObservationModel,
    Trajectory,
    flow,
    generate_truth,
    l96_rhs,
    load_observations_csv,
    load_trajectory_csv,
    make_propagator,
    observe,
    save_observations_csv,
    save_trajectory_csv,
    spin_up,
)


def rhs_reference(x, F):
    """Index-by-index re-implementation of the cyclic right-hand side."""
    d = len(x)
    out = np.empty(d)
    for i in range(d):
        out[i] = (x[(i + 1) % d] - x[(i - 2) % d]) * x[(i - 1) % d] - x[i] + F
    return out


class TestRhs:
    def test_hand_computed_d4(self):
        # x = (1,2,3,4), F = 10:
        # i=0: (x1 - x2) x3 - x0 + F = (2-3)*4 - 1 + 10 = 5
        # i=1: (x2 - x3) x0 - x1 + F = (3-4)*1 - 2 + 10 = 7
        # i=2: (x3 - x0) x1 - x2 + F = (4-1)*2 - 3 + 10 = 13
        # i=3: (x0 - x1) x2 - x3 + F = (1-2)*3 - 4 + 10 = 3
        got = l96_rhs(np.array([1.0, 2.0, 3.0, 4.0]), 10.0)
        np.testing.assert_allclose(got, [5.0, 7.0, 13.0, 3.0], rtol=0, atol=0)

    def test_matches_loop_reference(self):
        rng = np.random.default_rng(7)
        for d in (4, 5, 10, 17):
            x = rng.normal(size=d) * 3.0
            np.testing.assert_allclose(
                l96_rhs(x, 10.0), rhs_reference(x, 10.0), rtol=1e-14
            )

    def test_equilibrium(self):
        # x = F * ones is a fixed point of the dynamics
        x = np.full(10, 10.0)
        np.testing.assert_allclose(l96_rhs(x, 10.0), 0.0, atol=0)

    def test_batched_ensemble(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(6, 10))
        batch = l96_rhs(X, 10.0)
        for i in range(6):
            np.testing.assert_allclose(batch[i], l96_rhs(X[i], 10.0))

    def test_rejects_nonfinite(self):
        x = np.array([1.0, np.nan, 3.0, 4.0])
        with pytest.raises(InvalidStateError):
            l96_rhs(x, 10.0)


class TestModelConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert cfg.d == 10 and cfg.F == 10.0
        assert cfg.steps_per_gap == 5

    def test_g_not_multiple_of_dt(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(g=0.015, dt=0.01)

    def test_small_dimension_rejected(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(d=3)

    def test_nonpositive_steps(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(dt=0.0)
        with pytest.raises(ConfigurationError):
            ModelConfig(g=-0.05)


class TestFlow:
    def test_zero_time_is_identity(self):
        cfg = ModelConfig()
        x = np.arange(10.0)
        out = flow(x, 0.0, cfg)
        np.testing.assert_array_equal(out, x)
        assert out is not x  # copy, not alias

    def test_equilibrium_preserved(self):
        cfg = ModelConfig()
        x = np.full(cfg.d, cfg.F)
        out = flow(x, 5.0, cfg)
        np.testing.assert_allclose(out, x, atol=1e-10)

    def test_time_not_multiple_of_dt(self):
        with pytest.raises(ConfigurationError):
            flow(np.zeros(10), 0.005, ModelConfig())

    def test_negative_time(self):
        with pytest.raises(ConfigurationError):
            flow(np.zeros(10), -0.05, ModelConfig())

    def test_blowup_detection(self):
        # A huge non-uniform state makes the quadratic term explode quickly
        # (a uniform state would cancel it exactly).
        cfg = ModelConfig(d=10, g=0.05, dt=0.01)
        with pytest.raises(DivergenceError):
            flow(1e4 * np.arange(1.0, 11.0), 1.0, cfg)

    def test_composition(self):
        cfg = ModelConfig()
        rng = np.random.default_rng(11)
        x = rng.normal(size=10)
        once = flow(x, 0.2, cfg)
        twice = flow(flow(x, 0.1, cfg), 0.1, cfg)
        np.testing.assert_allclose(once, twice, rtol=1e-12, atol=1e-12)

    def test_rk4_order(self):
        # Halving dt should shrink the error by about 2^4 = 16.
        x0 = spin_up(0, ModelConfig(), n_iterations=200)
        t = 1.0
        ref = flow(x0, t, ModelConfig(dt=0.00625, g=0.05))
        e1 = np.linalg.norm(flow(x0, t, ModelConfig(dt=0.05, g=0.05)) - ref)
        e2 = np.linalg.norm(flow(x0, t, ModelConfig(dt=0.025, g=0.05)) - ref)
        assert 12.0 < e1 / e2 < 20.0

    def test_ensemble_flow_matches_per_member(self):
        cfg = ModelConfig()
        rng = np.random.default_rng(5)
        X = rng.normal(size=(4, 10))
        batch = flow(X, 0.1, cfg)
        for i in range(4):
            np.testing.assert_allclose(batch[i], flow(X[i], 0.1, cfg), rtol=1e-13)


class TestSpinUp:
    def test_deterministic(self):
        cfg = ModelConfig()
        a = spin_up(42, cfg, n_iterations=500)
        b = spin_up(42, cfg, n_iterations=500)
        np.testing.assert_array_equal(a, b)

    def test_seed_changes_result(self):
        cfg = ModelConfig()
        a = spin_up(1, cfg, n_iterations=500)
        b = spin_up(2, cfg, n_iterations=500)
        assert np.abs(a - b).max() > 1e-6

    def test_lands_on_attractor_scale(self):
        # Attractor states stay well inside |x_i| < 25 for F = 10.
        cfg = ModelConfig()
        for seed in (0, 1, 2):
            x = spin_up(seed, cfg, n_iterations=2000)
            assert np.abs(x).max() < 25.0


class TestTruth:
    def test_zero_steps(self):
        cfg = ModelConfig()
        x0 = spin_up(0, cfg, n_iterations=100)
        traj = generate_truth(x0, 0, cfg)
        assert traj.states.shape == (1, 10)
        np.testing.assert_array_equal(traj.states[0], x0)
        np.testing.assert_array_equal(traj.times, [0.0])

    def test_states_chain_through_flow(self):
        cfg = ModelConfig()
        x0 = spin_up(0, cfg, n_iterations=100)
        traj = generate_truth(x0, 5, cfg)
        assert traj.states.shape == (6, 10)
        np.testing.assert_array_equal(traj.states[3], flow(traj.states[2], cfg.g, cfg))
        np.testing.assert_allclose(traj.times, np.arange(6) * cfg.g)

    def test_regeneration_identical(self):
        cfg = ModelConfig()
        x0 = spin_up(0, cfg, n_iterations=100)
        a = generate_truth(x0, 5, cfg)
        b = generate_truth(x0, 5, cfg)
        np.testing.assert_array_equal(a.states, b.states)

    def test_propagator_matches_flow(self):
        cfg = ModelConfig()
        prop = make_propagator(cfg)
        x = spin_up(0, cfg, n_iterations=100)
        np.testing.assert_array_equal(prop(x), flow(x, cfg.g, cfg))


class TestObservation:
    def test_alternate_indices(self):
        obs = ObservationModel.alternate(10, 0.4)
        np.testing.assert_array_equal(obs.observed_indices, [0, 2, 4, 6, 8])
        assert obs.q == 5
        # odd d keeps q = ceil(d/2)
        assert ObservationModel.alternate(7, 0.4).q == 4

    def test_projection(self):
        obs = ObservationModel.alternate(10, 0.4)
        x = np.arange(10.0)
        np.testing.assert_array_equal(obs.project(x), [0.0, 2.0, 4.0, 6.0, 8.0])

    def test_projection_linearity(self):
        obs = ObservationModel.alternate(10, 0.0)
        rng = np.random.default_rng(2)
        x, y = rng.normal(size=(2, 10))
        np.testing.assert_allclose(
            obs.project(0.3 * x + 0.7 * y),
            0.3 * obs.project(x) + 0.7 * obs.project(y),
            rtol=1e-14,
        )

    def test_noise_free_observation(self):
        cfg = ModelConfig()
        traj = generate_truth(spin_up(0, cfg, 100), 3, cfg)
        obs = ObservationModel.alternate(10, 0.0)
        rec = observe(traj, obs, seed=0)
        np.testing.assert_array_equal(rec.y, obs.project(traj.states))

    def test_noise_variance(self):
        cfg = ModelConfig()
        traj = generate_truth(spin_up(0, cfg, 100), 0, cfg)
        obs = ObservationModel.alternate(10, 0.8)
        clean = obs.project(traj.states)
        draws = np.concatenate(
            [observe(traj, obs, seed=s).y - clean for s in range(2000)]
        ).ravel()
        assert draws.size == 10_000
        assert abs(draws.var() - 0.8) < 0.05 * 0.8

    def test_deterministic_given_seed(self):
        cfg = ModelConfig()
        traj = generate_truth(spin_up(0, cfg, 100), 3, cfg)
        obs = ObservationModel.alternate(10, 0.4)
        np.testing.assert_array_equal(
            observe(traj, obs, seed=9).y, observe(traj, obs, seed=9).y
        )

    def test_index_validation(self):
        with pytest.raises(ConfigurationError):
            ObservationModel(d=10, observed_indices=np.array([0, 10]), sigma2=0.4)
        with pytest.raises(ConfigurationError):
            ObservationModel(d=10, observed_indices=np.array([], dtype=int), sigma2=0.4)
        with pytest.raises(ConfigurationError):
            ObservationModel(d=10, observed_indices=np.array([0]), sigma2=-1.0)


class TestCsvRoundTrip:
    def test_trajectory(self, tmp_path):
        cfg = ModelConfig()
        traj = generate_truth(spin_up(0, cfg, 100), 4, cfg)
        path = tmp_path / "traj.csv"
        save_trajectory_csv(traj, path)
        back = load_trajectory_csv(path)
        np.testing.assert_array_equal(back.states, traj.states)
        np.testing.assert_array_equal(back.times, traj.times)

    def test_observations(self, tmp_path):
        cfg = ModelConfig()
        traj = generate_truth(spin_up(0, cfg, 100), 4, cfg)
        obs = ObservationModel.alternate(10, 0.4)
        rec = observe(traj, obs, seed=3)
        path = tmp_path / "obs.csv"
        save_observations_csv(rec, path, g=cfg.g)
        back = load_observations_csv(path)
        np.testing.assert_array_equal(back.y, rec.y)

    def test_single_row_trajectory(self, tmp_path):
        traj = Trajectory(states=np.arange(10.0)[None], times=np.array([0.0]))
        path = tmp_path / "one.csv"
        save_trajectory_csv(traj, path)
        back = load_trajectory_csv(path)
        assert back.states.shape == (1, 10)
        np.testing.assert_array_equal(back.states, traj.states)
