"""Closed-form Gaussian ground truth and its internal consistency."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klflow.oracle import (
    GaussianState,
    dt_term_gaussian,
    evolve_moments,
    fisher_gaussian,
    gaussian_state,
    identity_residual_gaussian,
    kl_derivative_gaussian,
    kl_gaussian,
)
from klflow.targets import GaussianPath, Schedule


def static_path(mean=0.0, s_sq=1.0, dim=1):
    m = np.full(dim, mean)
    return GaussianPath(m, m, s_sq, s_sq, Schedule("linear", 0.0, 1.0))


def moving_mean_path():
    # m(t): 0 -> 2 linearly over [0, 2], so m(t) = t and m' = 1 inside
    return GaussianPath(
        np.array([0.0]), np.array([2.0]), 1.0, 1.0, Schedule("linear", 0.0, 2.0)
    )


class TestClosedForms:
    def test_kl_mean_shift(self):
        st_ = gaussian_state(static_path(), 0.0, [2.0], 1.0)
        assert kl_gaussian(st_) == pytest.approx(2.0, rel=1e-15)

    def test_kl_variance(self):
        st_ = gaussian_state(static_path(), 0.0, [0.0], 2.0)
        want = 0.5 * (2.0 - 1.0 - np.log(2.0))
        assert kl_gaussian(st_) == pytest.approx(want, rel=1e-15)

    def test_fisher_mean_shift(self):
        st_ = gaussian_state(static_path(), 0.0, [1.0], 1.0)
        assert fisher_gaussian(st_) == pytest.approx(1.0, rel=1e-15)

    def test_fisher_variance(self):
        st_ = gaussian_state(static_path(), 0.0, [0.0], 2.0)
        # d sig (1/s2 - 1/sig)^2 = 2 (1 - 1/2)^2 = 0.5
        assert fisher_gaussian(st_) == pytest.approx(0.5, rel=1e-15)

    def test_dt_term_moving_mean(self):
        st_ = gaussian_state(moving_mean_path(), 0.5, [0.0], 1.0)
        # mu - m = -0.5, m' = 1, s^2 = 1 and s^2 constant
        assert st_.s_sq_dot == 0.0
        assert dt_term_gaussian(st_) == pytest.approx(-0.5, rel=1e-15)

    def test_dt_term_static_is_zero(self):
        st_ = gaussian_state(static_path(), 0.3, [1.7], 2.2)
        assert dt_term_gaussian(st_) == 0.0


class TestGaussianState:
    def test_validation(self):
        with pytest.raises(ValueError, match="positive"):
            GaussianState(0.0, [0.0], 0.0, [0.0], 1.0, [0.0], 0.0)
        with pytest.raises(ValueError, match="share one dimension"):
            GaussianState(0.0, [0.0, 1.0], 1.0, [0.0], 1.0, [0.0], 0.0)

    def test_snapshot_fields(self):
        p = moving_mean_path()
        st_ = gaussian_state(p, 0.5, [0.3], 1.4)
        assert st_.m[0] == 0.5
        assert st_.m_dot[0] == 1.0
        assert st_.s_sq == 1.0
        assert st_.dim == 1


class TestEvolveMoments:
    def test_exact_ou_solution(self):
        # static target: mu(t) = m + (mu0 - m) e^{-dt/s2},
        # sigma^2(t) = s2 + (sig0 - s2) e^{-2 dt/s2}
        p = static_path(mean=1.0, s_sq=2.0)
        s0 = gaussian_state(p, 0.0, [3.0], 0.5)
        s1 = evolve_moments(s0, p, 1.0)
        decay = np.exp(-1.0 / 2.0)
        assert s1.mu[0] == pytest.approx(1.0 + 2.0 * decay, rel=1e-15)
        assert s1.sigma_sq == pytest.approx(2.0 + (0.5 - 2.0) * decay**2, rel=1e-15)
        assert s1.t == 1.0

    def test_rk4_matches_exact_on_static_target(self):
        p = static_path(mean=1.0, s_sq=2.0)
        s0 = gaussian_state(p, 0.0, [3.0], 0.5)
        exact = evolve_moments(s0, p, 1.0, method="exact")
        rk4 = evolve_moments(s0, p, 1.0, dt_ode=1e-3, method="rk4")
        assert rk4.mu[0] == pytest.approx(exact.mu[0], abs=1e-12)
        assert rk4.sigma_sq == pytest.approx(exact.sigma_sq, abs=1e-12)

    def test_moving_mean_closed_form(self):
        # m(t) = t, s^2 = 1, mu(0) = 0: mu(t) = t - 1 + e^{-t}
        p = moving_mean_path()
        s0 = gaussian_state(p, 0.0, [0.0], 1.0)
        for t in (0.5, 1.0, 2.0):
            s = evolve_moments(s0, p, t, dt_ode=1e-4)
            assert s.mu[0] == pytest.approx(t - 1.0 + np.exp(-t), abs=1e-12)
            assert s.sigma_sq == pytest.approx(1.0, abs=1e-12)

    def test_exact_raises_on_varying_target(self):
        p = moving_mean_path()
        s0 = gaussian_state(p, 0.0, [0.0], 1.0)
        with pytest.raises(ValueError, match="constant target"):
            evolve_moments(s0, p, 1.0, method="exact")

    def test_exact_allowed_in_clamped_region(self):
        # beyond t_hi the schedule is clamped, so the target is constant
        p = moving_mean_path()
        s0 = gaussian_state(p, 2.0, [0.0], 1.0)
        s = evolve_moments(s0, p, 3.0, method="exact")
        decay = np.exp(-1.0)
        assert s.mu[0] == pytest.approx(2.0 + (0.0 - 2.0) * decay, rel=1e-14)

    def test_zero_span_returns_snapshot(self):
        p = moving_mean_path()
        s0 = gaussian_state(p, 0.5, [0.3], 1.1)
        s = evolve_moments(s0, p, 0.5)
        assert s.t == 0.5 and s.mu[0] == 0.3 and s.sigma_sq == 1.1

    def test_validation(self):
        p = static_path()
        s0 = gaussian_state(p, 0.5, [0.0], 1.0)
        with pytest.raises(ValueError, match="precedes"):
            evolve_moments(s0, p, 0.0)
        with pytest.raises(ValueError, match="dt_ode"):
            evolve_moments(s0, p, 1.0, dt_ode=0.0)
        with pytest.raises(ValueError, match="unknown method"):
            evolve_moments(s0, p, 1.0, method="euler")


@settings(max_examples=50, deadline=None)
@given(
    mu=st.floats(-3.0, 3.0),
    sigma_sq=st.floats(0.2, 5.0),
    m=st.floats(-2.0, 2.0),
    s_sq=st.floats(0.3, 4.0),
    m_dot=st.floats(-2.0, 2.0),
    s_sq_dot=st.floats(-1.0, 1.0),
)
def test_chain_rule_matches_identity(mu, sigma_sq, m, s_sq, m_dot, s_sq_dot):
    # d/dt KL assembled from partial derivatives must equal
    # -fisher - dt_term for every admissible state
    st_ = GaussianState(0.0, [mu], sigma_sq, [m], s_sq, [m_dot], s_sq_dot)
    lhs = kl_derivative_gaussian(st_)
    rhs = -fisher_gaussian(st_) - dt_term_gaussian(st_)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


class TestIdentityResidual:
    def test_chain_mode_vanishes_to_roundoff(self):
        p = static_path()
        s0 = gaussian_state(p, 0.1, [2.0], 1.0)
        t_grid = np.linspace(0.1, 2.0, 191)
        records, summary = identity_residual_gaussian(p, s0, t_grid, mode="chain")
        assert summary.max_relative_residual <= 1e-14
        assert summary.n_interior == 191
        assert all(r.kl_fd is not None for r in records)

    def test_fd_mode_leaves_endpoints_empty(self):
        p = static_path()
        s0 = gaussian_state(p, 0.1, [2.0], 1.0)
        t_grid = np.linspace(0.1, 1.1, 11)
        records, summary = identity_residual_gaussian(p, s0, t_grid, mode="fd")
        assert records[0].kl_fd is None and records[-1].kl_fd is None
        assert summary.n_interior == 9
        # h = 0.1 central differences on e^{-2t} KL decay: visible error
        assert 0.0 < summary.max_relative_residual < 0.01

    def test_fd_mode_converges_quadratically(self):
        # both grids put their first interior point at t = 0.2, where the
        # exponentially decaying residual peaks, so quartering the spacing
        # divides the max residual by 16 (up to the O(h^4) correction)
        p = static_path()
        s0 = gaussian_state(p, 0.1, [2.0], 1.0)
        _, coarse = identity_residual_gaussian(p, s0, np.linspace(0.1, 1.1, 11), mode="fd")
        _, fine = identity_residual_gaussian(p, s0, np.linspace(0.175, 1.1, 38), mode="fd")
        ratio = coarse.max_abs_residual / fine.max_abs_residual
        assert 15.8 < ratio < 16.3

    def test_t_grid_validation(self):
        p = static_path()
        s0 = gaussian_state(p, 0.0, [1.0], 1.0)
        with pytest.raises(ValueError, match="at least 3"):
            identity_residual_gaussian(p, s0, np.array([0.0, 1.0]))
        with pytest.raises(ValueError, match="increasing"):
            identity_residual_gaussian(p, s0, np.array([0.0, 0.5, 0.5]))
        with pytest.raises(ValueError, match="unknown mode"):
            identity_residual_gaussian(p, s0, np.linspace(0.0, 1.0, 5), mode="spectral")
        with pytest.raises(ValueError, match="before the state"):
            identity_residual_gaussian(p, s0, np.linspace(-1.0, 1.0, 5))
