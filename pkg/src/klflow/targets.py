"""Time-dependent target densities p_t and their annealing paths.

A target family exposes log p_t, its spatial gradient (the score), and two
time derivatives: d/dt log p_t (used by the dissipation diagnostics) and
d/dt p_t (used by the growth checker). All evaluations are pure functions
of (t, x) and therefore safe to call concurrently.

Points are arrays whose last axis has length ``dim``; scalar fields come
back with that axis dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Schedule",
    "GaussianPath",
    "TargetFamily",
    "GaussianPathFamily",
    "GaussianMixturePathFamily",
    "SignFlippedGaussianStub",
    "make_gaussian_path",
    "make_gaussian_mixture_path",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Schedule:
    """Interpolation rule mapping [t_lo, t_hi] onto [0, 1].

    ``linear`` is C^0 at the endpoints and should be used on open
    intervals; ``smoothstep`` (3u^2 - 2u^3) is C^1 everywhere, endpoints
    included. Outside the window the value clamps and the rate is zero.
    """

    kind: str
    t_lo: float
    t_hi: float

    def __post_init__(self):
        if self.kind not in ("linear", "smoothstep"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.t_hi > self.t_lo:
            raise ValueError("schedule window must satisfy t_lo < t_hi")

    def value(self, t: float) -> float:
        u = (t - self.t_lo) / (self.t_hi - self.t_lo)
        u = min(max(u, 0.0), 1.0)
        if self.kind == "linear":
            return u
        return u * u * (3.0 - 2.0 * u)

    def derivative(self, t: float) -> float:
        u = (t - self.t_lo) / (self.t_hi - self.t_lo)
        if u <= 0.0 or u >= 1.0:
            return 0.0
        du = 1.0 / (self.t_hi - self.t_lo)
        if self.kind == "linear":
            return du
        return 6.0 * u * (1.0 - u) * du


@dataclass(frozen=True)
class GaussianPath:
    """Mean and isotropic-variance schedules of a Gaussian target.

    m(t) interpolates m0 -> m1 and s^2(t) interpolates s0_sq -> s1_sq
    under the same schedule. Variances must stay positive, which linear
    interpolation of positive endpoints guarantees.
    """

    m0: np.ndarray
    m1: np.ndarray
    s0_sq: float
    s1_sq: float
    schedule: Schedule

    def __post_init__(self):
        if self.s0_sq <= 0.0 or self.s1_sq <= 0.0:
            raise ValueError("variance schedule endpoints must be positive")
        if self.m0.shape != self.m1.shape or self.m0.ndim != 1:
            raise ValueError("mean endpoints must be 1-d arrays of equal length")

    @property
    def dim(self) -> int:
        return self.m0.shape[0]

    @property
    def static(self) -> bool:
        return bool(np.array_equal(self.m0, self.m1)) and self.s0_sq == self.s1_sq

    def mean(self, t: float) -> np.ndarray:
        lam = self.schedule.value(t)
        return self.m0 + lam * (self.m1 - self.m0)

    def mean_dot(self, t: float) -> np.ndarray:
        return self.schedule.derivative(t) * (self.m1 - self.m0)

    def var(self, t: float) -> float:
        lam = self.schedule.value(t)
        return self.s0_sq + lam * (self.s1_sq - self.s0_sq)

    def var_dot(self, t: float) -> float:
        return self.schedule.derivative(t) * (self.s1_sq - self.s0_sq)

    def var_max(self) -> float:
        return max(self.s0_sq, self.s1_sq)

    def mean_box(
        self, t_lo: float | None = None, t_hi: float | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Componentwise bounds of m(t) over [t_lo, t_hi] (default: all t).

        Both schedule kinds are monotone in t, so the hull of the two
        endpoint means is exact.
        """
        if t_lo is None and t_hi is None:
            return np.minimum(self.m0, self.m1), np.maximum(self.m0, self.m1)
        if t_lo is None or t_hi is None or t_hi < t_lo:
            raise ValueError("give both interval endpoints with t_lo <= t_hi")
        a = self.mean(t_lo)
        b = self.mean(t_hi)
        return np.minimum(a, b), np.maximum(a, b)


class TargetFamily:
    """Interface of a time-dependent target density.

    Subclasses provide ``log_density``, ``grad_log_density`` and
    ``dt_log_density``; ``dt_density`` defaults to p_t * d/dt log p_t.
    ``support_bounds`` reports a box containing the mean motion, used for
    grid construction together with ``max_std``.
    """

    dim: int

    def log_density(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_log_density(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dt_log_density(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dt_density(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density(t, x)) * self.dt_log_density(t, x)

    @property
    def is_static(self) -> bool:
        """True when the density does not depend on t."""
        return False

    def support_bounds(
        self, t_lo: float | None = None, t_hi: float | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Box containing the mean motion over [t_lo, t_hi] (default: all t)."""
        raise NotImplementedError

    def max_std(self) -> float:
        raise NotImplementedError

    def _check_point_shape(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ValueError(
                f"points must have trailing axis of length {self.dim}, got shape {x.shape}"
            )
        return x


class GaussianPathFamily(TargetFamily):
    """Isotropic Gaussian target N(m(t), s^2(t) I) following a path."""

    def __init__(self, path: GaussianPath):
        self.path = path
        self.dim = path.dim

    def log_density(self, t, x):
        x = self._check_point_shape(x)
        m = self.path.mean(t)
        s_sq = self.path.var(t)
        r_sq = np.sum((x - m) ** 2, axis=-1)
        return -0.5 * (self.dim * (_LOG_2PI + np.log(s_sq)) + r_sq / s_sq)

    def grad_log_density(self, t, x):
        x = self._check_point_shape(x)
        return -(x - self.path.mean(t)) / self.path.var(t)

    def dt_log_density(self, t, x):
        # d/dt log N(m(t), s^2(t)):
        #   -d s2'/(2 s2) + |x-m|^2 s2'/(2 s2^2) + (x-m).m'/s2
        x = self._check_point_shape(x)
        m = self.path.mean(t)
        m_dot = self.path.mean_dot(t)
        s_sq = self.path.var(t)
        s_sq_dot = self.path.var_dot(t)
        diff = x - m
        r_sq = np.sum(diff**2, axis=-1)
        out = np.zeros(x.shape[:-1], dtype=float)
        if s_sq_dot != 0.0:
            out = out + s_sq_dot * (r_sq / (2.0 * s_sq * s_sq) - self.dim / (2.0 * s_sq))
        if np.any(m_dot != 0.0):
            out = out + diff @ m_dot / s_sq
        return out

    @property
    def is_static(self):
        return self.path.static

    def support_bounds(self, t_lo=None, t_hi=None):
        return self.path.mean_box(t_lo, t_hi)

    def max_std(self):
        return float(np.sqrt(self.path.var_max()))


class GaussianMixturePathFamily(TargetFamily):
    """Equal-variance Gaussian mixture with per-component mean schedules.

    Weights are constant in t and the shared isotropic variance is
    constant, so d/dt log p reduces to a responsibility-weighted sum of
    the component mean-motion terms.
    """

    def __init__(self, weights: np.ndarray, paths: list[GaussianPath], s_sq: float):
        if len(paths) == 0:
            raise ValueError("mixture needs at least one component")
        if len(weights) != len(paths):
            raise ValueError("one weight per component required")
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0.0):
            raise ValueError("mixture weights must be positive")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if s_sq <= 0.0:
            raise ValueError("mixture variance must be positive")
        dims = {p.dim for p in paths}
        if len(dims) != 1:
            raise ValueError("mixture components must share one dimension")
        self.weights = weights
        self.paths = paths
        self.s_sq = float(s_sq)
        self.dim = paths[0].dim

    def _component_logs(self, t, x):
        """Per-component log(w_k N_k), stacked on a new leading axis."""
        norm = -0.5 * self.dim * (_LOG_2PI + np.log(self.s_sq))
        logs = []
        for w, p in zip(self.weights, self.paths):
            r_sq = np.sum((x - p.mean(t)) ** 2, axis=-1)
            logs.append(np.log(w) + norm - 0.5 * r_sq / self.s_sq)
        return np.stack(logs, axis=0)

    def log_density(self, t, x):
        x = self._check_point_shape(x)
        logs = self._component_logs(t, x)
        peak = np.max(logs, axis=0)
        return peak + np.log(np.sum(np.exp(logs - peak), axis=0))

    def _responsibilities(self, t, x):
        logs = self._component_logs(t, x)
        peak = np.max(logs, axis=0)
        w = np.exp(logs - peak)
        return w / np.sum(w, axis=0)

    def grad_log_density(self, t, x):
        x = self._check_point_shape(x)
        resp = self._responsibilities(t, x)
        out = np.zeros_like(x)
        for r, p in zip(resp, self.paths):
            out += r[..., None] * (-(x - p.mean(t)) / self.s_sq)
        return out

    def dt_log_density(self, t, x):
        x = self._check_point_shape(x)
        resp = self._responsibilities(t, x)
        out = np.zeros(x.shape[:-1], dtype=float)
        for r, p in zip(resp, self.paths):
            m_dot = p.mean_dot(t)
            if np.any(m_dot != 0.0):
                out += r * ((x - p.mean(t)) @ m_dot) / self.s_sq
        return out

    @property
    def is_static(self):
        return all(p.static for p in self.paths)

    def support_bounds(self, t_lo=None, t_hi=None):
        lows, highs = zip(*(p.mean_box(t_lo, t_hi) for p in self.paths))
        return np.min(lows, axis=0), np.max(highs, axis=0)

    def max_std(self):
        return float(np.sqrt(self.s_sq))


class SignFlippedGaussianStub(TargetFamily):
    """Deliberately broken static family with score +x instead of -x.

    Unnormalizable; exists only to exercise violation paths of the
    assumption checkers. Do not use as a simulation target.
    """

    def __init__(self, dim: int = 1):
        self.dim = dim

    def log_density(self, t, x):
        x = self._check_point_shape(x)
        return 0.5 * np.sum(x**2, axis=-1) - 0.5 * self.dim * _LOG_2PI

    def grad_log_density(self, t, x):
        x = self._check_point_shape(x)
        return x.copy()

    def dt_log_density(self, t, x):
        x = self._check_point_shape(x)
        return np.zeros(x.shape[:-1], dtype=float)

    @property
    def is_static(self):
        return True

    def support_bounds(self, t_lo=None, t_hi=None):
        z = np.zeros(self.dim)
        return z, z

    def max_std(self):
        return 1.0


def make_gaussian_path(
    m0,
    m1,
    s0_sq: float,
    s1_sq: float,
    schedule: str = "smoothstep",
    t_lo: float = 0.0,
    t_hi: float = 1.0,
) -> GaussianPathFamily:
    """Build the Gaussian target family N(m(t), s^2(t) I_d).

    The score is -(x - m(t)) / s^2(t) and both time derivatives are
    analytic, so the family is exact to machine precision everywhere.
    """
    m0 = np.atleast_1d(np.asarray(m0, dtype=float))
    m1 = np.atleast_1d(np.asarray(m1, dtype=float))
    path = GaussianPath(m0, m1, float(s0_sq), float(s1_sq), Schedule(schedule, t_lo, t_hi))
    return GaussianPathFamily(path)


def make_gaussian_mixture_path(
    components,
    s_sq: float,
    schedule: str = "smoothstep",
    t_lo: float = 0.0,
    t_hi: float = 1.0,
) -> GaussianMixturePathFamily:
    """Build an equal-variance Gaussian mixture target.

    ``components`` is a list of (weight, m0, m1) triples; every component
    mean interpolates under the same schedule and all share the variance
    ``s_sq``.
    """
    if len(components) == 0:
        raise ValueError("mixture needs at least one component")
    sched = Schedule(schedule, t_lo, t_hi)
    weights = []
    paths = []
    for w, m0, m1 in components:
        m0 = np.atleast_1d(np.asarray(m0, dtype=float))
        m1 = np.atleast_1d(np.asarray(m1, dtype=float))
        weights.append(float(w))
        paths.append(GaussianPath(m0, m1, float(s_sq), float(s_sq), sched))
    return GaussianMixturePathFamily(np.asarray(weights), paths, float(s_sq))
