"""Probe-based checkers for the drift conditions a target family must satisfy.

Four conditions are checked, all over a finite probe set (deterministic
lattice of 32 points per axis, plus 1000 seeded quasi-random points):

1. dissipativity: -x . grad log p_t(x) >= a|x|^2 - b for some a > 0,
   b >= 0, uniformly over probes and times;
2. Lipschitz continuity of grad p_t (estimated from difference
   quotients over probe pairs; the literature sometimes reads this
   condition on grad log p_t instead, so both variants are available);
3. growth of the time derivative: |d/dt p_t(x)| <= c|x|^2;
4. differentiability consistency: the family's analytic gradient and
   time derivative match finite differences of its log-density.

Every number these checkers produce is a certificate over the probe set
only, a lower bound on the true constants, never a global guarantee;
the conditions are global statements that finite probing cannot
certify. Reports are deterministic given the probe seed.

The growth bound c|x|^2 vanishes at x = 0, so it can only hold there if
d/dt p_t(0) = 0, which moving targets violate at isolated times. The
checker therefore excludes a ball of radius 1e-3 around the origin from
the ratio and reports the near-origin time derivative separately;
probing exactly x = 0 is a precondition error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import qmc

from .targets import TargetFamily

__all__ = [
    "AssumptionReport",
    "DifferentiabilityReport",
    "probe_points",
    "check_dissipativity",
    "check_lipschitz",
    "check_growth",
    "check_differentiability",
    "run_all_checks",
]

LATTICE_POINTS_PER_AXIS = 32
QUASI_RANDOM_PROBES = 1000
ORIGIN_EXCLUSION_RADIUS = 1e-3


@dataclass(frozen=True)
class AssumptionReport:
    """Aggregate certificate over the probe set.

    ``dissipativity_pair`` holds (a, b) when the inequality holds at
    every probe; otherwise it is None and ``violation_witness`` holds
    the worst (t, x). Fields not produced by the originating checker
    stay None.
    """

    probe_box: tuple[np.ndarray, np.ndarray]
    probe_count: int
    times: tuple[float, ...]
    dissipativity_pair: tuple[float, float] | None = None
    violation_witness: tuple[float, np.ndarray] | None = None
    lipschitz_estimate: float | None = None
    lipschitz_log_estimate: float | None = None
    growth_constant: float | None = None
    growth_near_origin: float | None = None
    differentiability: "DifferentiabilityReport | None" = None

    @property
    def satisfied(self) -> bool:
        return self.violation_witness is None


@dataclass(frozen=True)
class DifferentiabilityReport:
    max_grad_rel_error: float
    max_dt_rel_error: float
    probe_count: int


def _check_times(times) -> list[float]:
    out = [float(t) for t in times]
    if not out:
        raise ValueError("need at least one probe time")
    return out


def _check_box(box: tuple, dim: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.atleast_1d(np.asarray(box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(box[1], dtype=float))
    if lo.shape != (dim,) or hi.shape != (dim,):
        raise ValueError(f"box bounds must have shape ({dim},)")
    if np.any(hi < lo):
        raise ValueError("box upper bounds must not be below lower bounds")
    return lo, hi


def probe_points(box: tuple, dim: int, seed: int = 0) -> np.ndarray:
    """Lattice plus seeded Halton probes inside the box, shape (N, dim)."""
    lo, hi = _check_box(box, dim)
    axes = [np.linspace(lo[k], hi[k], LATTICE_POINTS_PER_AXIS) for k in range(dim)]
    if dim == 1:
        lattice = axes[0][:, None]
    else:
        lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    quasi = lo + sampler.random(QUASI_RANDOM_PROBES) * (hi - lo)
    return np.concatenate([lattice, quasi], axis=0)


def check_dissipativity(
    family: TargetFamily,
    box: tuple,
    times: list[float],
    target_a: float,
    b_max: float = 10.0,
    seed: int = 0,
) -> AssumptionReport:
    """Largest (a, b=0) certificate, else (target_a, b), else a witness.

    With g(t, x) = -x . grad log p_t(x), the probe set admits b = 0
    exactly when a0 = min g/|x|^2 is positive; if a0 >= target_a the
    report is (a0, 0). Otherwise the smallest slack making a = target_a
    work is b = max(target_a |x|^2 - g); if that exceeds b_max, the
    binding probe is returned as the violation witness.
    """
    if target_a <= 0.0:
        raise ValueError(f"target_a must be positive, got {target_a}")
    times = _check_times(times)
    points = probe_points(box, family.dim, seed)
    norms_sq = np.sum(points**2, axis=-1)
    nz = norms_sq > 0.0

    a0 = np.inf
    worst_b = -np.inf
    worst = None
    for t in times:
        g = -np.sum(points * family.grad_log_density(float(t), points), axis=-1)
        ratios = g[nz] / norms_sq[nz]
        t_min = float(ratios.min())
        if t_min < a0:
            a0 = t_min
        b_needed = target_a * norms_sq - g
        j = int(np.argmax(b_needed))
        if b_needed[j] > worst_b:
            worst_b = float(b_needed[j])
            worst = (float(t), points[j].copy())

    base = dict(probe_box=_check_box(box, family.dim), probe_count=len(points), times=tuple(float(t) for t in times))
    if a0 >= target_a:
        return AssumptionReport(**base, dissipativity_pair=(a0, 0.0))
    b = max(worst_b, 0.0)
    if b <= b_max:
        return AssumptionReport(**base, dissipativity_pair=(target_a, b))
    return AssumptionReport(**base, violation_witness=worst)


def check_lipschitz(
    family: TargetFamily,
    box: tuple,
    times: list[float],
    gradient_of: str = "density",
    seed: int = 0,
) -> float:
    """Max difference quotient of the gradient field over probe pairs.

    ``gradient_of="density"`` estimates the Lipschitz constant of
    grad p_t = p_t grad log p_t (the condition as stated);
    ``"log_density"`` estimates it for the score grad log p_t (the
    common reading). Lower bound on the true constant; a degenerate box
    with a single distinct probe yields 0.
    """
    if gradient_of not in ("density", "log_density"):
        raise ValueError(f"gradient_of must be 'density' or 'log_density', got {gradient_of!r}")
    times = _check_times(times)
    points = probe_points(box, family.dim, seed)
    dx = pdist(points)
    ok = dx > 0.0
    if not np.any(ok):
        return 0.0
    best = 0.0
    for t in times:
        score = family.grad_log_density(float(t), points)
        if gradient_of == "density":
            field = np.exp(family.log_density(float(t), points))[:, None] * score
        else:
            field = score
        dg = pdist(field)
        best = max(best, float((dg[ok] / dx[ok]).max()))
    return best


def check_growth(
    family: TargetFamily, box: tuple, times: list[float], seed: int = 0
) -> tuple[float, float | None]:
    """Smallest c with |d/dt p_t(x)| <= c|x|^2 over the probe set.

    Returns (c, near_origin), where near_origin is the largest
    |d/dt p_t| over probes inside the excluded origin ball (None when no
    probe falls there). Requesting a probe at exactly x = 0 is an
    error: the ratio is undefined there.
    """
    times = _check_times(times)
    points = probe_points(box, family.dim, seed)
    norms_sq = np.sum(points**2, axis=-1)
    if np.any(norms_sq == 0.0):
        raise ValueError(
            "probe at x = 0 requested; the growth ratio |dt p|/|x|^2 is undefined at the origin"
        )
    near = norms_sq < ORIGIN_EXCLUSION_RADIUS**2
    c = 0.0
    near_origin: float | None = None
    for t in times:
        dtp = np.abs(family.dt_density(float(t), points))
        c = max(c, float((dtp[~near] / norms_sq[~near]).max()))
        if np.any(near):
            worst = float(dtp[near].max())
            near_origin = worst if near_origin is None else max(near_origin, worst)
    return c, near_origin


def check_differentiability(
    family: TargetFamily,
    box: tuple,
    times: list[float],
    n_probes: int = 100,
    seed: int = 0,
) -> DifferentiabilityReport:
    """Consistency of analytic derivatives with finite differences.

    grad log p is compared against a 5-point central stencil per axis;
    d/dt log p against a central difference in t. Relative errors are
    measured against max(|analytic|, 1), so near-zero derivatives are
    judged absolutely. Smooth families land around 1e-10; anything
    above 1e-6 indicates an inconsistent implementation.
    """
    times = _check_times(times)
    lo, hi = _check_box(box, family.dim)
    rng = np.random.default_rng(seed)
    x = lo + rng.random((n_probes, family.dim)) * (hi - lo)
    t_arr = np.asarray(times, dtype=float)

    h = 1e-3 * max(family.max_std(), 1e-6)
    max_grad = 0.0
    max_dt = 0.0
    for t in t_arr:
        t = float(t)
        analytic = family.grad_log_density(t, x)
        fd = np.empty_like(analytic)
        for k in range(family.dim):
            e = np.zeros(family.dim)
            e[k] = 1.0
            f = lambda s: family.log_density(t, x + s * e)
            fd[:, k] = (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)
        denom = np.maximum(np.abs(analytic), 1.0)
        max_grad = max(max_grad, float((np.abs(fd - analytic) / denom).max()))

        ht = 1e-5 * max(abs(t), 1.0)
        dt_fd = (family.log_density(t + ht, x) - family.log_density(t - ht, x)) / (2 * ht)
        dt_an = family.dt_log_density(t, x)
        denom_t = np.maximum(np.abs(dt_an), 1.0)
        max_dt = max(max_dt, float((np.abs(dt_fd - dt_an) / denom_t).max()))
    return DifferentiabilityReport(max_grad, max_dt, n_probes)


def run_all_checks(
    family: TargetFamily,
    box: tuple,
    times: list[float],
    target_a: float = 0.25,
    b_max: float = 10.0,
    seed: int = 0,
) -> AssumptionReport:
    """All four checkers, aggregated into one report."""
    diss = check_dissipativity(family, box, times, target_a, b_max, seed)
    lip = check_lipschitz(family, box, times, "density", seed)
    lip_log = check_lipschitz(family, box, times, "log_density", seed)
    growth, near = check_growth(family, box, times, seed)
    diff = check_differentiability(family, box, times, seed=seed)
    return AssumptionReport(
        probe_box=diss.probe_box,
        probe_count=diss.probe_count,
        times=diss.times,
        dissipativity_pair=diss.dissipativity_pair,
        violation_witness=diss.violation_witness,
        lipschitz_estimate=lip,
        lipschitz_log_estimate=lip_log,
        growth_constant=growth,
        growth_near_origin=near,
        differentiability=diff,
    )
