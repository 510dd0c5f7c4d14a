"""Explicit finite-volume solver for the Fokker-Planck equation

    d/dt q = -div(q grad log p_t) + Lap q

on a cell-centered grid with no-flux boundaries. Face fluxes use
exponential fitting (the Chang-Cooper / Scharfetter-Gummel weight
B(z) = z / (e^z - 1)), with the face drift taken as the divided
difference of log p_t between the two adjacent cell centers. That
choice makes the discretized target itself the exact stationary state
of the update: the scheme then never manufactures spurious KL against
a static target, and every step is a stochastic (probability-
preserving, sign-preserving) map whenever the step size satisfies
dt * rate_max <= 1.

The step size limit is enforced sharply from the per-cell outflow rates
the kernels report, not from an a-priori mesh bound; a violated bound
raises ``StabilityError`` naming the largest admissible dt.
"""

from __future__ import annotations

import numpy as np

from ._backend import fp_step_1d, fp_step_2d
from .grid import Grid, GridDensity
from .targets import TargetFamily

__all__ = ["StabilityError", "face_drifts", "fp_step", "estimate_stable_dt", "fp_solve"]


class StabilityError(RuntimeError):
    """Raised when a step size violates the positivity bound."""

    def __init__(self, dt: float, dt_max: float):
        self.dt = dt
        self.dt_max = dt_max
        super().__init__(
            f"dt={dt:.6e} violates the positivity bound; largest admissible dt is {dt_max:.6e}"
        )


def face_drifts(family: TargetFamily, t: float, grid: Grid) -> tuple[np.ndarray, ...]:
    """Per-face drifts: divided differences of log p_t across each face.

    Returns one array per axis; axis k's array has the grid shape with
    axis k shortened by one (interior faces only).
    """
    logp = family.log_density(t, grid.center_points())
    if grid.dim == 1:
        return ((logp[1:] - logp[:-1]) / grid.axes[0].h,)
    hx, hy = grid.spacings
    return ((logp[1:, :] - logp[:-1, :]) / hx, (logp[:, 1:] - logp[:, :-1]) / hy)


def _step_values(
    values: np.ndarray, drifts: tuple[np.ndarray, ...], dt: float, grid: Grid
) -> tuple[np.ndarray, float]:
    if grid.dim == 1:
        return fp_step_1d(values, drifts[0], dt, grid.axes[0].h)
    hx, hy = grid.spacings
    return fp_step_2d(values, drifts[0], drifts[1], dt, hx, hy)


def fp_step(density: GridDensity, family: TargetFamily, dt: float) -> GridDensity:
    """One explicit step from ``density.t`` to ``density.t + dt``."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    drifts = face_drifts(family, density.t, density.grid)
    values, rate_max = _step_values(density.values, drifts, dt, density.grid)
    if dt * rate_max > 1.0:
        raise StabilityError(dt, 1.0 / rate_max)
    return GridDensity(density.grid, density.t + dt, values)


def estimate_stable_dt(
    family: TargetFamily,
    grid: Grid,
    t_lo: float,
    t_hi: float,
    safety: float = 0.9,
    time_probes: int = 9,
) -> float:
    """Step size satisfying the positivity bound across [t_lo, t_hi].

    Probes the outflow rates at several times and takes
    ``safety / max rate``. The bound is verified sharply again at every
    actual step, so a drift field that peaks between probe times fails
    loudly rather than silently.
    """
    if not 0.0 < safety <= 1.0:
        raise ValueError(f"safety must be in (0, 1], got {safety}")
    times = [t_lo] if family.is_static or t_hi == t_lo else np.linspace(t_lo, t_hi, time_probes)
    probe = np.zeros(grid.shape)
    rate_max = 0.0
    for t in times:
        drifts = face_drifts(family, float(t), grid)
        _, r = _step_values(probe, drifts, 1.0, grid)
        rate_max = max(rate_max, r)
    if rate_max <= 0.0:
        raise ValueError("degenerate drift field: no admissible step size found")
    return safety / rate_max


def fp_solve(
    q0: GridDensity,
    family: TargetFamily,
    t0: float,
    t1: float,
    dt: float | None = None,
    checkpoint_times: np.ndarray | None = None,
    safety: float = 0.9,
) -> list[GridDensity]:
    """March ``q0`` from t0 to t1, landing exactly on each checkpoint.

    Checkpoints (default: just ``[t1]``) must be strictly increasing and
    lie within [t0, t1]. Within each checkpoint interval the nominal dt
    is shrunk to an integer number of equal sub-steps, so checkpoint
    times are hit exactly (no trailing fractional step). Returns the
    density at every checkpoint; a checkpoint at t0 (including the
    zero-length interval t0 = t1) yields the initial state.
    """
    if abs(q0.t - t0) > 1e-12:
        raise ValueError(f"q0 is at time {q0.t}, expected t0={t0}")
    if t1 < t0:
        raise ValueError(f"need t0 <= t1, got [{t0}, {t1}]")
    checkpoints = np.asarray([t1] if checkpoint_times is None else checkpoint_times, dtype=float)
    if checkpoints.ndim != 1 or checkpoints.size == 0:
        raise ValueError("checkpoints must be a nonempty 1D array")
    if np.any(np.diff(checkpoints) <= 0.0):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints[0] < t0 - 1e-12 or checkpoints[-1] > t1 + 1e-12:
        raise ValueError(f"checkpoints must lie within [{t0}, {t1}]")
    if dt is None and t1 > t0:
        dt = estimate_stable_dt(family, q0.grid, t0, t1, safety)
    elif dt is None:
        dt = 1.0

    grid = q0.grid
    static = family.is_static
    drifts = face_drifts(family, q0.t, grid) if static else None

    out: list[GridDensity] = []
    values = q0.values
    t_cur = q0.t
    for t_next in checkpoints:
        span = float(t_next - t_cur)
        if span <= 0.0:
            out.append(GridDensity(grid, float(t_next), values))
            continue
        n_sub = max(1, int(np.ceil(span / dt - 1e-12)))
        dt_sub = span / n_sub
        for j in range(n_sub):
            t_sub = t_cur + j * dt_sub
            d = drifts if static else face_drifts(family, t_sub, grid)
            values, rate_max = _step_values(values, d, dt_sub, grid)
            if dt_sub * rate_max > 1.0:
                raise StabilityError(dt_sub, 1.0 / rate_max)
        t_cur = float(t_next)
        out.append(GridDensity(grid, t_cur, values))
    return out
