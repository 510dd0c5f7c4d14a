"""Particle simulation: reproducibility, parallel/resume invariance, moments."""

import numpy as np
import pytest

from klflow.grid import Axis, Grid
from klflow.sde import (
    ParticleEnsemble,
    em_step,
    histogram_density,
    init_gaussian_ensemble,
    simulate,
)


class TestInitEnsemble:
    def test_shape_streams_and_metadata(self):
        e = init_gaussian_ensemble(100, 2, [1.0, -1.0], 4.0, seed=42, t=0.5)
        assert e.positions.shape == (100, 2)
        assert e.n == 100 and e.dim == 2
        assert e.t == 0.5
        assert e.seed == 42
        assert e.step_index == 0
        np.testing.assert_array_equal(e.streams, np.arange(100, dtype=np.uint64))

    def test_moments(self):
        e = init_gaussian_ensemble(200_000, 1, [3.0], 4.0, seed=1)
        x = e.positions[:, 0]
        # SE of the mean is 2/sqrt(N) ~ 0.0045
        assert abs(x.mean() - 3.0) < 0.02
        assert abs(x.var() - 4.0) < 0.08

    def test_reproducible(self):
        a = init_gaussian_ensemble(50, 2, 0.0, 1.0, seed=9)
        b = init_gaussian_ensemble(50, 2, 0.0, 1.0, seed=9)
        np.testing.assert_array_equal(a.positions, b.positions)
        c = init_gaussian_ensemble(50, 2, 0.0, 1.0, seed=10)
        assert not np.array_equal(a.positions, c.positions)

    def test_validation(self):
        with pytest.raises(ValueError, match="at least one"):
            init_gaussian_ensemble(0, 1, 0.0, 1.0, seed=1)
        with pytest.raises(ValueError, match="sigma_sq"):
            init_gaussian_ensemble(10, 1, 0.0, 0.0, seed=1)


class TestEnsembleValidation:
    def test_rejects_non_finite_positions_naming_particle(self):
        pos = np.zeros((5, 1))
        pos[3, 0] = np.nan
        with pytest.raises(ValueError, match="particle 3"):
            ParticleEnsemble(pos, 0.0, 1, np.arange(5, dtype=np.uint64))

    def test_rejects_wrong_stream_count(self):
        with pytest.raises(ValueError, match="one stream index per particle"):
            ParticleEnsemble(np.zeros((5, 1)), 0.0, 1, np.arange(4, dtype=np.uint64))

    def test_rejects_flat_positions(self):
        with pytest.raises(ValueError, match="positions"):
            ParticleEnsemble(np.zeros(5), 0.0, 1, np.arange(5, dtype=np.uint64))


class TestEmStep:
    def test_advances_time_and_counter(self, standard_normal_family):
        e = init_gaussian_ensemble(10, 1, 0.0, 1.0, seed=3)
        e1 = em_step(e, standard_normal_family, 0.01)
        assert e1.t == pytest.approx(0.01)
        assert e1.step_index == 1
        assert e1.seed == e.seed
        np.testing.assert_array_equal(e1.streams, e.streams)

    def test_diffusion_coefficient_validation(self, standard_normal_family):
        e = init_gaussian_ensemble(10, 1, 0.0, 1.0, seed=3)
        em_step(e, standard_normal_family, 0.01, diffusion_coefficient=1.0)
        with pytest.raises(ValueError, match="diffusion_coefficient"):
            em_step(e, standard_normal_family, 0.01, diffusion_coefficient=0.5)
        with pytest.raises(ValueError, match="dt must be positive"):
            em_step(e, standard_normal_family, -0.01)

    def test_deterministic_given_state(self, standard_normal_family):
        e = init_gaussian_ensemble(32, 1, 0.0, 1.0, seed=5)
        a = em_step(e, standard_normal_family, 0.01)
        b = em_step(e, standard_normal_family, 0.01)
        np.testing.assert_array_equal(a.positions, b.positions)


def test_stationary_variance_matches_em_fixed_point(standard_normal_family):
    # for the N(0,1) target the EM chain x' = (1-dt) x + sqrt(2 dt) xi
    # has stationary variance v = 2 dt / (1 - (1-dt)^2) = 1 / (1 - dt/2)
    dt = 0.05
    v_star = 1.0 / (1.0 - dt / 2.0)
    n = 100_000
    e = init_gaussian_ensemble(n, 1, 0.0, v_star, seed=77)
    (out,) = simulate(e, standard_normal_family, 0.0, 20 * dt, dt)
    v_hat = out.positions[:, 0].var()
    se = v_star * np.sqrt(2.0 / n)
    assert abs(v_hat - v_star) < 4 * se


def test_worker_count_does_not_change_trajectories(moving_family):
    e = init_gaussian_ensemble(1000, 1, -0.5, 1.5, seed=13)
    cps = np.array([0.3, 1.0])
    serial = simulate(e, moving_family, 0.0, 1.0, 0.01, checkpoint_times=cps, workers=1)
    threaded = simulate(e, moving_family, 0.0, 1.0, 0.01, checkpoint_times=cps, workers=3)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.positions, b.positions)
        assert a.step_index == b.step_index


def test_resume_from_snapshot_is_exact(moving_family):
    e = init_gaussian_ensemble(500, 1, -0.5, 1.5, seed=21)
    full = simulate(
        e, moving_family, 0.0, 1.0, 0.01, checkpoint_times=np.array([0.5, 1.0])
    )
    (half,) = simulate(e, moving_family, 0.0, 0.5, 0.01)
    resumed = simulate(half, moving_family, 0.5, 1.0, 0.01)
    np.testing.assert_array_equal(full[0].positions, half.positions)
    np.testing.assert_array_equal(full[1].positions, resumed[0].positions)
    assert full[1].step_index == resumed[0].step_index


def test_simulate_checkpoint_validation(standard_normal_family):
    e = init_gaussian_ensemble(10, 1, 0.0, 1.0, seed=1)
    with pytest.raises(ValueError, match="expected t0"):
        simulate(e, standard_normal_family, 0.5, 1.0, 0.01)
    with pytest.raises(ValueError, match="increasing"):
        simulate(
            e,
            standard_normal_family,
            0.0,
            1.0,
            0.01,
            checkpoint_times=np.array([0.6, 0.4]),
        )
    with pytest.raises(ValueError, match="within"):
        simulate(
            e,
            standard_normal_family,
            0.0,
            1.0,
            0.01,
            checkpoint_times=np.array([1.5]),
        )
    with pytest.raises(ValueError, match="dt must be positive"):
        simulate(e, standard_normal_family, 0.0, 1.0, 0.0)


def test_em_step_rejects_nonfinite_drift():
    # a family whose score blows up at the origin-adjacent probe
    from klflow.targets import SignFlippedGaussianStub

    class BadFamily(SignFlippedGaussianStub):
        def grad_log_density(self, t, x):
            g = super().grad_log_density(t, x)
            g[1] = np.inf
            return g

    e = init_gaussian_ensemble(4, 1, 0.0, 1.0, seed=2)
    with pytest.raises(ValueError, match="particle 1"):
        em_step(e, BadFamily(dim=1), 0.01)


class TestHistogramDensity:
    def grid(self):
        return Grid((Axis(-1.0, 1.0, 8),))

    def test_mass_is_in_domain_fraction(self):
        g = self.grid()
        pos = np.array([[-0.9], [0.1], [0.2], [5.0]])  # one outside
        e = ParticleEnsemble(pos, 0.0, 1, np.arange(4, dtype=np.uint64))
        res = histogram_density(e, g)
        assert res.out_of_domain_fraction == pytest.approx(0.25)
        assert res.density.mass == pytest.approx(0.75)
        assert res.flagged

    def test_counts_land_in_correct_cells(self):
        g = self.grid()  # h = 0.25, cells [-1,-0.75), ...
        pos = np.array([[-1.0], [-0.99], [0.99]])
        e = ParticleEnsemble(pos, 0.0, 1, np.arange(3, dtype=np.uint64))
        res = histogram_density(e, g)
        v = res.density.values
        assert v[0] == pytest.approx(2 / (3 * 0.25))
        assert v[-1] == pytest.approx(1 / (3 * 0.25))
        assert not res.flagged

    def test_unflagged_when_fully_inside(self):
        g = self.grid()
        pos = np.zeros((100, 1))
        e = ParticleEnsemble(pos, 0.0, 1, np.arange(100, dtype=np.uint64))
        res = histogram_density(e, g)
        assert res.out_of_domain_fraction == 0.0
        assert not res.flagged
        assert res.density.mass == pytest.approx(1.0)

    def test_2d_binning(self):
        g = Grid((Axis(0.0, 1.0, 8), Axis(0.0, 1.0, 8)))
        pos = np.array([[0.05, 0.95]])
        e = ParticleEnsemble(pos, 0.0, 1, np.arange(1, dtype=np.uint64))
        res = histogram_density(e, g)
        assert res.density.values[0, 7] > 0.0
        assert res.density.mass == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        e = init_gaussian_ensemble(10, 2, 0.0, 1.0, seed=1)
        with pytest.raises(ValueError, match="dimension"):
            histogram_density(e, self.grid())
