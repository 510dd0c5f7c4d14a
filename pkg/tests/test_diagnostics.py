"""Diagnostics: KL, Fisher, identity residuals, envelopes, histogram KL."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klflow.diagnostics import (
    DiagnosticsRecord,
    check_envelope,
    compute_record,
    expected_dt_log_p,
    histogram_kl,
    kl_divergence,
    kl_time_derivative_fd,
    l1_distance,
    relative_fisher_information,
    verify_identity,
)
from klflow.grid import Axis, Grid, GridDensity, build_grid, discretize
from klflow.targets import make_gaussian_path

from conftest import gaussian_on


@pytest.fixture
def wide_grid(standard_normal_family):
    return build_grid(standard_normal_family, None, 2048, padding_sigmas=10.0)


class TestKlDivergence:
    def test_mean_shift_closed_form(self, standard_normal_family, wide_grid):
        # KL(N(2,1) || N(0,1)) = 2^2 / 2 = 2
        q = gaussian_on(wide_grid, mean=2.0, sigma_sq=1.0)
        assert kl_divergence(q, standard_normal_family) == pytest.approx(2.0, abs=1e-10)

    def test_variance_closed_form(self, standard_normal_family, wide_grid):
        # KL(N(0,2) || N(0,1)) = (1 - ln 2) / 2
        q = gaussian_on(wide_grid, mean=0.0, sigma_sq=2.0)
        want = 0.15342640972002733
        assert kl_divergence(q, standard_normal_family) == pytest.approx(want, abs=1e-10)

    def test_self_kl_vanishes(self, standard_normal_family, wide_grid):
        q = gaussian_on(wide_grid, mean=0.0, sigma_sq=1.0)
        assert abs(kl_divergence(q, standard_normal_family)) < 1e-12

    def test_requires_normalized_density(self, standard_normal_family, wide_grid):
        q = gaussian_on(wide_grid, mean=0.0, sigma_sq=1.0)
        bad = GridDensity(wide_grid, 0.0, 2.0 * q.values)
        with pytest.raises(ValueError, match="normalize"):
            kl_divergence(bad, standard_normal_family)

    def test_raises_when_target_underflows_under_real_mass(self, standard_normal_family):
        # uniform mass out to |x|=100 where log p ~ -5000 is unrepresentable
        g = Grid((Axis(-100.0, 100.0, 64),))
        q = GridDensity(g, 0.0, np.full(64, 1.0 / 200.0))
        with pytest.raises(ValueError, match="underflows"):
            kl_divergence(q, standard_normal_family)


class TestFisher:
    def test_mean_shift_closed_form(self, standard_normal_family, wide_grid):
        # score difference is constant 1, so the integral is 1
        q = gaussian_on(wide_grid, mean=1.0, sigma_sq=1.0)
        res = relative_fisher_information(q, standard_normal_family)
        assert res.fisher == pytest.approx(1.0, abs=1e-9)
        assert res.excluded_mass < 1e-6

    def test_variance_closed_form(self, standard_normal_family, wide_grid):
        # score difference x/2, integral of q x^2/4 = 2/4
        q = gaussian_on(wide_grid, mean=0.0, sigma_sq=2.0)
        res = relative_fisher_information(q, standard_normal_family)
        assert res.fisher == pytest.approx(0.5, abs=1e-9)

    def test_excluded_mass_warns_over_1e6(self, standard_normal_family):
        g = Grid((Axis(0.0, 1e12, 8),))
        vol = g.cell_volume
        vals = np.full(8, 1e-5 / (7.0 * vol))  # below the 1e-12 cell threshold
        vals[0] = (1.0 - 1e-5) / vol
        q = GridDensity(g, 0.0, vals)
        with pytest.warns(RuntimeWarning, match="excluded mass"):
            res = relative_fisher_information(q, standard_normal_family)
        assert res.excluded_mass == pytest.approx(1e-5, rel=1e-6)

    def test_excluded_mass_raises_over_1e3(self, standard_normal_family):
        g = Grid((Axis(0.0, 1e12, 8),))
        vol = g.cell_volume
        vals = np.full(8, 5e-3 / (7.0 * vol))
        vals[0] = (1.0 - 5e-3) / vol
        q = GridDensity(g, 0.0, vals)
        with pytest.raises(ValueError, match="excluded mass"):
            relative_fisher_information(q, standard_normal_family)


def test_expected_dt_log_p_closed_form(wide_grid):
    # target mean moves at rate 1; E_q[x - m(t)] = -0.5 gives -0.5
    fam = make_gaussian_path([0.0], [1.0], 1.0, 1.0, schedule="linear")
    q = gaussian_on(wide_grid, mean=0.0, sigma_sq=1.0, t=0.5)
    assert expected_dt_log_p(q, fam) == pytest.approx(-0.5, abs=1e-10)


class TestComputeRecord:
    def test_fields_are_wired(self, standard_normal_family, wide_grid):
        q = gaussian_on(wide_grid, mean=1.0, sigma_sq=1.0, t=0.25)
        r = compute_record(q, standard_normal_family)
        assert r.t == 0.25
        assert r.kl == pytest.approx(0.5, abs=1e-9)
        assert r.fisher == pytest.approx(1.0, abs=1e-9)
        assert r.dt_term == 0.0
        assert r.kl_fd is None and r.residual is None

    def test_tiny_negative_kl_clamps_to_zero(self, standard_normal_family):
        # a coarse grid with a cell center on the mean makes the midpoint
        # mass of the target exceed 1 by ~8e-14 (Poisson summation), so
        # the self-KL quadrature is a tiny negative number
        g = Grid((Axis(-8.4, 8.4, 21),))
        q = discretize(standard_normal_family, 0.0, g)
        r = compute_record(q, standard_normal_family)
        assert r.kl == 0.0

    def test_large_negative_kl_raises(self, standard_normal_family):
        # same construction at h = 1 pushes the excess mass to ~5e-9,
        # well past the -1e-12 clamp window
        g = Grid((Axis(-7.5, 8.5, 16),))
        q = discretize(standard_normal_family, 0.0, g)
        with pytest.raises(ValueError, match="KL quadrature"):
            compute_record(q, standard_normal_family)


class TestKlTimeDerivativeFd:
    def records_quadratic(self):
        ts = np.linspace(0.0, 1.0, 6)
        return [DiagnosticsRecord(t=t, kl=t * t, fisher=0.0, dt_term=0.0) for t in ts]

    def test_central_difference_exact_on_quadratic(self):
        recs = kl_time_derivative_fd(self.records_quadratic())
        assert recs[0].kl_fd is None
        assert recs[-1].kl_fd is None
        for r in recs[1:-1]:
            assert r.kl_fd == pytest.approx(2.0 * r.t, rel=1e-12, abs=1e-14)

    def test_needs_three_records(self):
        with pytest.raises(ValueError, match="at least 3"):
            kl_time_derivative_fd(self.records_quadratic()[:2])

    def test_needs_increasing_times(self):
        recs = self.records_quadratic()
        recs[2].t = recs[1].t
        with pytest.raises(ValueError, match="increasing"):
            kl_time_derivative_fd(recs)


class TestVerifyIdentity:
    def test_residual_wiring(self):
        recs = [
            DiagnosticsRecord(t=0.0, kl=1.0, fisher=2.0, dt_term=-0.5),
            DiagnosticsRecord(t=0.1, kl=1.0, fisher=2.0, dt_term=-0.5, kl_fd=-1.4),
            DiagnosticsRecord(t=0.2, kl=1.0, fisher=2.0, dt_term=-0.5),
        ]
        recs, summary = verify_identity(recs)
        # residual = kl_fd - (-fisher - dt_term) = -1.4 + 1.5 = 0.1
        assert recs[1].residual == pytest.approx(0.1, rel=1e-12)
        assert recs[1].relative_residual == pytest.approx(0.1 / 2.0, rel=1e-12)
        assert recs[0].residual is None
        assert summary.n_interior == 1
        assert summary.max_abs_residual == pytest.approx(0.1, rel=1e-12)
        assert summary.max_relative_residual == pytest.approx(0.05, rel=1e-12)

    def test_scale_floor_protects_stationary_checkpoints(self):
        recs = [
            DiagnosticsRecord(t=0.0, kl=0.0, fisher=0.0, dt_term=0.0, kl_fd=1e-12),
        ]
        _, summary = verify_identity(recs)
        assert summary.max_relative_residual == pytest.approx(1e-12 / 1e-8, rel=1e-12)


class TestCheckEnvelope:
    def test_standard_normal_satisfies_loose_envelope(self, standard_normal_family):
        g = build_grid(standard_normal_family, None, 256)
        q = discretize(standard_normal_family, 0.0, g)
        rep = check_envelope(q, 1.0, 0.4)
        assert rep.satisfied
        assert rep.worst_violation is None
        assert rep.c1 == 1.0 and rep.c2 == 0.4

    def test_tight_upper_envelope_fails_with_witness(self, standard_normal_family):
        g = build_grid(standard_normal_family, None, 256)
        q = discretize(standard_normal_family, 0.0, g)
        rep = check_envelope(q, 1.0, 100.0)
        assert not rep.satisfied
        w = rep.worst_violation
        # the log gap log q + c2 x^2 grows with |x|, so the worst cell is
        # at the domain edge, and the density there exceeds the bound
        assert abs(w.x[0]) > 7.9
        assert w.q_value > w.bound_value

    def test_zero_cell_violates_lower_envelope(self):
        g = Grid((Axis(-1.0, 1.0, 8),))
        vals = np.full(8, 1.0 / (7 * 0.25))
        vals[3] = 0.0
        q = GridDensity(g, 0.0, vals)
        rep = check_envelope(q, 1.0, 0.4)
        assert not rep.satisfied
        assert rep.worst_violation.q_value == 0.0
        assert rep.worst_violation.bound_value > 0.0
        assert rep.worst_violation.x[0] == pytest.approx(-0.125)

    def test_rejects_nonpositive_constants(self, standard_normal_family):
        g = build_grid(standard_normal_family, None, 64)
        q = discretize(standard_normal_family, 0.0, g)
        with pytest.raises(ValueError, match="positive"):
            check_envelope(q, 0.0, 1.0)
        with pytest.raises(ValueError, match="positive"):
            check_envelope(q, 1.0, -2.0)


class TestL1Distance:
    def test_hand_value(self):
        g = Grid((Axis(-1.0, 1.0, 8),))
        a = GridDensity(g, 0.0, np.full(8, 0.5))
        vals = np.full(8, 0.5)
        vals[0] += 0.1
        vals[1] -= 0.1
        b = GridDensity(g, 0.0, vals)
        assert l1_distance(a, b) == pytest.approx(0.05, rel=1e-14)
        assert l1_distance(a, a) == 0.0

    def test_grid_mismatch_rejected(self):
        a = GridDensity(Grid((Axis(-1.0, 1.0, 8),)), 0.0, np.full(8, 0.5))
        b = GridDensity(Grid((Axis(-1.0, 1.0, 16),)), 0.0, np.full(16, 0.5))
        with pytest.raises(ValueError, match="different grids"):
            l1_distance(a, b)


class TestHistogramKl:
    def grid(self):
        return Grid((Axis(0.0, 1.0, 8),))

    def test_single_cell_hand_value(self, standard_normal_family):
        # all 16 particles in cell 0: w = 1, g = log(8) - log p(x_0),
        # one occupied cell so the bias correction and the SE vanish
        g = self.grid()
        vals = np.zeros(8)
        vals[0] = 8.0
        hist = GridDensity(g, 0.0, vals)
        res = histogram_kl(hist, standard_normal_family, 16)
        x0 = np.array([0.0625])
        want = np.log(8.0) - float(standard_normal_family.log_density(0.0, x0))
        assert res.kl_plugin == pytest.approx(want, rel=1e-13)
        assert res.kl == res.kl_plugin
        assert res.se == 0.0
        assert res.occupied_cells == 1

    def test_miller_madow_correction(self, standard_normal_family):
        g = self.grid()
        vals = np.zeros(8)
        vals[0] = 4.0
        vals[1] = 4.0
        hist = GridDensity(g, 0.0, vals)
        n = 16
        res = histogram_kl(hist, standard_normal_family, n)
        assert res.occupied_cells == 2
        assert res.kl == pytest.approx(res.kl_plugin - 1.0 / (2 * n), rel=1e-13)
        logp = standard_normal_family.log_density(0.0, g.center_points())
        gvals = np.log(4.0) - logp[:2]
        plugin = 0.5 * gvals.sum()
        assert res.kl_plugin == pytest.approx(float(plugin), rel=1e-13)
        second = 0.5 * (gvals**2).sum()
        assert res.se == pytest.approx(float(np.sqrt((second - plugin**2) / n)), rel=1e-12)

    def test_requires_unit_mass(self, standard_normal_family):
        g = self.grid()
        vals = np.full(8, 0.9)  # mass 0.9
        with pytest.raises(ValueError, match="histogram mass"):
            histogram_kl(GridDensity(g, 0.0, vals), standard_normal_family, 100)

    def test_requires_two_particles(self, standard_normal_family):
        g = self.grid()
        hist = GridDensity(g, 0.0, np.full(8, 1.0))
        with pytest.raises(ValueError, match="at least 2"):
            histogram_kl(hist, standard_normal_family, 1)


@settings(max_examples=20, deadline=None)
@given(
    mean=st.floats(-2.0, 2.0),
    sigma_sq=st.floats(0.5, 3.0),
)
def test_kl_and_fisher_nonnegative(mean, sigma_sq):
    fam = make_gaussian_path([0.0], [0.0], 1.0, 1.0)
    g = Grid((Axis(-12.0, 12.0, 512),))
    q = gaussian_on(g, mean=mean, sigma_sq=sigma_sq)
    assert kl_divergence(q, fam) >= -1e-12
    assert relative_fisher_information(q, fam).fisher >= 0.0
