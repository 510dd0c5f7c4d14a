"""Dissipation-identity diagnostics on grid densities.

Computes the three terms of

    d/dt KL(q_t|p_t) = -int q_t |grad log(q_t/p_t)|^2 - int q_t d/dt log p_t

by midpoint quadrature against a target family, realizes the left-hand
side by central finite differences of the KL series, and reports the
identity residual per checkpoint. Also checks the two-sided Gaussian
envelope exp(-c1(|x|^2+1)) <= q(x) <= exp(-c2 |x|^2) cellwise.

Quadrature conventions, fixed across the package:

* 0 * log 0 = 0: cells with q below 1e-300 contribute nothing to KL.
* The Fisher integrand needs log q gradients, which are meaningless in
  deep tails; cells with q below 1e-12 are excluded and their total
  mass is reported, never silently dropped.
* Reductions run in fixed index order (plain sums over arrays), so
  results are deterministic across runs and worker counts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grid import GridDensity
from .targets import TargetFamily

__all__ = [
    "DiagnosticsRecord",
    "IdentitySummary",
    "EnvelopeReport",
    "kl_divergence",
    "relative_fisher_information",
    "expected_dt_log_p",
    "compute_record",
    "kl_time_derivative_fd",
    "verify_identity",
    "check_envelope",
    "l1_distance",
    "histogram_kl",
    "HistogramKLResult",
]

#: Below this, a cell is treated as empty (0 log 0 = 0).
Q_FLOOR = 1e-300
#: Below this, a cell is excluded from the Fisher integrand.
FISHER_EXCLUSION_THRESHOLD = 1e-12
#: Residual normalization floor, for near-stationary states where all terms are ~0.
RESIDUAL_SCALE_FLOOR = 1e-8

_MASS_TOL = 1e-8


@dataclass
class DiagnosticsRecord:
    """Identity terms at one checkpoint; kl_fd and residual are filled later."""

    t: float
    kl: float
    fisher: float
    dt_term: float
    excluded_mass: float = 0.0
    kl_fd: float | None = None
    residual: float | None = None
    relative_residual: float | None = None

    CSV_COLUMNS = ("t", "kl", "fisher", "dt_term", "kl_fd", "residual", "relative_residual", "excluded_mass")

    def csv_row(self) -> list[str]:
        out = []
        for name in self.CSV_COLUMNS:
            v = getattr(self, name)
            out.append("" if v is None else repr(float(v)))
        return out


@dataclass(frozen=True)
class IdentitySummary:
    max_abs_residual: float
    max_relative_residual: float
    n_interior: int


class WorstViolation(NamedTuple):
    x: np.ndarray
    q_value: float
    bound_value: float


@dataclass(frozen=True)
class EnvelopeReport:
    c1: float
    c2: float
    satisfied: bool
    worst_violation: WorstViolation | None


def _check_normalized(q: GridDensity) -> None:
    if abs(q.mass - 1.0) > _MASS_TOL:
        raise ValueError(
            f"density mass is {q.mass:.12g}, expected 1; normalize before diagnostics"
        )


def kl_divergence(q: GridDensity, family: TargetFamily) -> float:
    """Midpoint quadrature of q log(q/p) at time q.t, with 0 log 0 = 0.

    p is evaluated through the family's log-density, so the ratio is
    formed in log space and p itself never underflows. Cells where the
    target's log-density is below log(1e-300) while q carries real mass
    (> 1e-12) indicate a grid far larger than the target's support and
    raise instead of returning a junk value.
    """
    _check_normalized(q)
    logp = family.log_density(q.t, q.grid.center_points())
    v = q.values
    occupied = v >= Q_FLOOR
    bad = (v > FISHER_EXCLUSION_THRESHOLD) & (logp < np.log(Q_FLOOR))
    if np.any(bad):
        idx = np.unravel_index(np.argmax(bad), v.shape)
        raise ValueError(
            f"target density underflows at cell {idx} where q={v[idx]:.3e}; "
            "the grid extends far beyond the target's support"
        )
    integrand = np.zeros_like(v)
    with np.errstate(divide="ignore"):
        integrand[occupied] = v[occupied] * (np.log(v[occupied]) - logp[occupied])
    return float(integrand.sum() * q.grid.cell_volume)


class FisherResult(NamedTuple):
    fisher: float
    excluded_mass: float


def relative_fisher_information(q: GridDensity, family: TargetFamily) -> FisherResult:
    """Quadrature of q |grad log q - grad log p|^2, with tail exclusion.

    grad log q comes from central differences of log q on the grid
    (one-sided at the boundary); grad log p is the family's analytic
    score. Cells with q below 1e-12 are excluded from the integrand and
    their mass is returned alongside; an exclusion mass above 1e-6 warns
    and above 1e-3 raises, since then the estimate no longer represents
    the full integral.
    """
    _check_normalized(q)
    grid = q.grid
    v = q.values
    logq = np.log(np.maximum(v, Q_FLOOR))
    score_p = family.grad_log_density(q.t, grid.center_points())
    if grid.dim == 1:
        grads = [np.gradient(logq, grid.axes[0].h)]
    else:
        grads = list(np.gradient(logq, *grid.spacings))
    sq = np.zeros_like(v)
    for k, g in enumerate(grads):
        sq += (g - score_p[..., k]) ** 2
    included = v > FISHER_EXCLUSION_THRESHOLD
    fisher = float((v * sq * included).sum() * grid.cell_volume)
    excluded_mass = float((v * ~included).sum() * grid.cell_volume)
    if excluded_mass > 1e-3:
        raise ValueError(
            f"excluded mass {excluded_mass:.3e} exceeds 1e-3; "
            "the density has too much weight below the Fisher threshold"
        )
    if excluded_mass > 1e-6:
        warnings.warn(
            f"Fisher quadrature excluded mass {excluded_mass:.3e} (> 1e-6)",
            RuntimeWarning,
            stacklevel=2,
        )
    return FisherResult(fisher, excluded_mass)


def expected_dt_log_p(q: GridDensity, family: TargetFamily) -> float:
    """Midpoint quadrature of q * d/dt log p_t."""
    _check_normalized(q)
    dtlog = family.dt_log_density(q.t, q.grid.center_points())
    return float((q.values * dtlog).sum() * q.grid.cell_volume)


def compute_record(q: GridDensity, family: TargetFamily) -> DiagnosticsRecord:
    """All three identity terms at one checkpoint.

    Tiny negative KL (quadrature roundoff) is clamped to 0; anything
    below -1e-12 means a real defect and raises.
    """
    kl = kl_divergence(q, family)
    if kl < -1e-12:
        raise ValueError(f"KL quadrature produced {kl:.3e} < -1e-12; density or target invalid")
    kl = max(kl, 0.0)
    fisher, excluded = relative_fisher_information(q, family)
    dt_term = expected_dt_log_p(q, family)
    return DiagnosticsRecord(t=q.t, kl=kl, fisher=fisher, dt_term=dt_term, excluded_mass=excluded)


def kl_time_derivative_fd(records: list[DiagnosticsRecord]) -> list[DiagnosticsRecord]:
    """Fill kl_fd at interior checkpoints by central differences.

    kl_fd(t_i) = (kl(t_{i+1}) - kl(t_{i-1})) / (t_{i+1} - t_{i-1});
    endpoints stay absent. Needs at least 3 records with strictly
    increasing times. Records are modified in place and returned.
    """
    if len(records) < 3:
        raise ValueError(f"need at least 3 records for central differences, got {len(records)}")
    times = np.array([r.t for r in records])
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("record times must be strictly increasing")
    for i in range(1, len(records) - 1):
        span = records[i + 1].t - records[i - 1].t
        records[i].kl_fd = (records[i + 1].kl - records[i - 1].kl) / span
    return records


def verify_identity(
    records: list[DiagnosticsRecord],
) -> tuple[list[DiagnosticsRecord], IdentitySummary]:
    """Fill residuals where kl_fd is present and summarize.

    residual = kl_fd - (-fisher - dt_term); the relative residual is
    normalized by max(fisher, |dt_term|, 1e-8) so that near-stationary
    checkpoints (all terms ~ 0) do not blow up the ratio.
    """
    max_abs = 0.0
    max_rel = 0.0
    n_interior = 0
    for r in records:
        if r.kl_fd is None:
            continue
        r.residual = r.kl_fd - (-r.fisher - r.dt_term)
        scale = max(r.fisher, abs(r.dt_term), RESIDUAL_SCALE_FLOOR)
        r.relative_residual = abs(r.residual) / scale
        max_abs = max(max_abs, abs(r.residual))
        max_rel = max(max_rel, r.relative_residual)
        n_interior += 1
    return records, IdentitySummary(max_abs, max_rel, n_interior)


def check_envelope(q: GridDensity, c1: float, c2: float) -> EnvelopeReport:
    """Cellwise two-sided envelope check in log space.

    Verifies exp(-c1(|x|^2+1)) <= q(x) <= exp(-c2|x|^2) at every cell
    center. Comparisons run on log q, so a c2 large enough to underflow
    exp(-c2|x|^2) still yields correct verdicts. A cell with q = 0
    violates any positive lower envelope. The worst violation (largest
    log-space gap, with q = 0 counting as infinitely bad) is reported
    with linear-scale values.
    """
    if c1 <= 0.0 or c2 <= 0.0:
        raise ValueError(f"envelope constants must be positive, got c1={c1}, c2={c2}")
    points = q.grid.center_points()
    r_sq = np.sum(points**2, axis=-1)
    v = q.values
    with np.errstate(divide="ignore"):
        logq = np.where(v > 0.0, np.log(np.maximum(v, Q_FLOOR)), -np.inf)
    log_upper = -c2 * r_sq
    log_lower = -c1 * (r_sq + 1.0)
    upper_gap = logq - log_upper          # > 0 means upper bound violated
    lower_gap = log_lower - logq          # > 0 means lower bound violated
    worst_gap = np.maximum(upper_gap, lower_gap)
    i = np.unravel_index(np.argmax(worst_gap), v.shape)
    if worst_gap[i] <= 0.0:
        return EnvelopeReport(c1, c2, True, None)
    bound_log = log_upper[i] if upper_gap[i] >= lower_gap[i] else log_lower[i]
    witness = WorstViolation(
        x=np.atleast_1d(points[i]).copy(),
        q_value=float(v[i]),
        bound_value=float(np.exp(bound_log)),
    )
    return EnvelopeReport(c1, c2, False, witness)


def l1_distance(a: GridDensity, b: GridDensity) -> float:
    """L1 distance between two densities on the same grid."""
    if a.grid != b.grid:
        raise ValueError("densities live on different grids")
    return float(np.abs(a.values - b.values).sum() * a.grid.cell_volume)


class HistogramKLResult(NamedTuple):
    kl: float
    se: float
    kl_plugin: float
    occupied_cells: int


def histogram_kl(hist: GridDensity, family: TargetFamily, n_particles: int) -> HistogramKLResult:
    """KL(empirical || target) from a particle histogram, with an error bar.

    The plug-in estimate sum_j w_j log(v_j / p_j) (w_j = cell count / N)
    carries an upward bias of about (M - 1) / (2N) for M occupied cells,
    the Miller-Madow entropy correction; ``kl`` removes it. ``se`` is
    the delta-method standard error sqrt(Var_w[log(v/p)] / N). Both
    require the histogram to be fully in-domain (mass 1), since the
    estimator has no model for conditioning on a sub-domain.
    """
    if n_particles < 2:
        raise ValueError("need at least 2 particles for an error bar")
    if abs(hist.mass - 1.0) > 1e-9:
        raise ValueError(
            f"histogram mass is {hist.mass:.12g}; out-of-domain particles "
            "must be absent (enlarge the grid)"
        )
    v = hist.values
    occupied = v > 0.0
    m = int(occupied.sum())
    logp = family.log_density(hist.t, hist.grid.center_points())
    g = np.zeros_like(v)
    g[occupied] = np.log(v[occupied]) - logp[occupied]
    w = v * hist.grid.cell_volume
    kl_plugin = float((w * g).sum())
    second = float((w * g * g).sum())
    se = float(np.sqrt(max(second - kl_plugin**2, 0.0) / n_particles))
    kl_mm = kl_plugin - (m - 1) / (2.0 * n_particles)
    return HistogramKLResult(kl=kl_mm, se=se, kl_plugin=kl_plugin, occupied_cells=m)
