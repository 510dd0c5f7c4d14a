"""Strict TOML experiment configuration.

Every key is validated against a fixed schema; unknown keys are errors
naming the full dotted path, so a typo like ``[solver] padding_sigma``
fails loudly instead of silently using the default. Values are checked
for type and basic range here; deeper semantic validation happens in
the constructing modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .targets import (
    SignFlippedGaussianStub,
    TargetFamily,
    make_gaussian_mixture_path,
    make_gaussian_path,
)

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "build_family"]


class ConfigError(ValueError):
    """Invalid configuration; message names the offending key path."""


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    dim: int
    m0: tuple[float, ...] = ()
    m1: tuple[float, ...] = ()
    s0_sq: float = 1.0
    s1_sq: float = 1.0
    s_sq: float = 1.0
    components: tuple[tuple[float, tuple[float, ...], tuple[float, ...]], ...] = ()
    schedule: str = "smoothstep"
    t_lo: float = 0.0
    t_hi: float = 1.0


@dataclass(frozen=True)
class SolverSpec:
    n: tuple[int, ...]
    padding_sigmas: float = 8.0
    dt: float | None = None  # None: derive from the stability bound
    safety: float = 0.9


@dataclass(frozen=True)
class SimulationSpec:
    n_particles: int = 10000
    seed: int = 0
    dt: float = 1e-3
    diffusion_coefficient: float = 2.0
    workers: int = 1
    comparison_grid_n: int = 64
    with_grid: bool = True


@dataclass(frozen=True)
class DiagnosticsSpec:
    t0: float = 0.0
    t1: float = 1.0
    n_checkpoints: int = 11
    tolerance: float = 5e-3
    dt_ode: float = 1e-3
    envelope_c1: float | None = None
    envelope_c2: float | None = None

    def checkpoint_times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n_checkpoints)


@dataclass(frozen=True)
class InitialSpec:
    mean: tuple[float, ...] = (0.0,)
    sigma_sq: float = 1.0


@dataclass(frozen=True)
class AssumptionsSpec:
    box_lo: tuple[float, ...] = (-5.0,)
    box_hi: tuple[float, ...] = (5.0,)
    times: tuple[float, ...] = (0.5,)
    target_a: float = 0.25
    b_max: float = 10.0
    seed: int = 0


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    csv: bool = True
    plots: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    family: FamilySpec
    solver: SolverSpec
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    assumptions: AssumptionsSpec = field(default_factory=AssumptionsSpec)
    output: OutputSpec = field(default_factory=OutputSpec)


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise ConfigError(f"missing required key {path}.{key}")
    return table[key]


def _no_unknown(table: dict, allowed: set[str], path: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}.{key}")


def _as_float(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path} must be a number, got {type(v).__name__}")
    return float(v)


def _as_int(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path} must be an integer, got {type(v).__name__}")
    return v


def _as_bool(v, path: str) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{path} must be a boolean, got {type(v).__name__}")
    return v


def _as_point(v, path: str) -> tuple[float, ...]:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (float(v),)
    if isinstance(v, list) and v and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        return tuple(float(x) for x in v)
    raise ConfigError(f"{path} must be a number or a nonempty list of numbers")


def _parse_family(table: dict) -> FamilySpec:
    kind = _require(table, "kind", "family")
    if kind == "gaussian-path":
        _no_unknown(
            table,
            {"kind", "m0", "m1", "s0_sq", "s1_sq", "schedule", "t_lo", "t_hi"},
            "family",
        )
        m0 = _as_point(_require(table, "m0", "family"), "family.m0")
        m1 = _as_point(_require(table, "m1", "family"), "family.m1")
        if len(m0) != len(m1):
            raise ConfigError("family.m0 and family.m1 must have the same dimension")
        return FamilySpec(
            kind=kind,
            dim=len(m0),
            m0=m0,
            m1=m1,
            s0_sq=_as_float(table.get("s0_sq", 1.0), "family.s0_sq"),
            s1_sq=_as_float(table.get("s1_sq", 1.0), "family.s1_sq"),
            schedule=str(table.get("schedule", "smoothstep")),
            t_lo=_as_float(table.get("t_lo", 0.0), "family.t_lo"),
            t_hi=_as_float(table.get("t_hi", 1.0), "family.t_hi"),
        )
    if kind == "gaussian-mixture-path":
        _no_unknown(
            table, {"kind", "components", "s_sq", "schedule", "t_lo", "t_hi"}, "family"
        )
        raw = _require(table, "components", "family")
        if not isinstance(raw, list) or not raw:
            raise ConfigError("family.components must be a nonempty list of tables")
        comps = []
        for i, c in enumerate(raw):
            path = f"family.components[{i}]"
            if not isinstance(c, dict):
                raise ConfigError(f"{path} must be a table")
            _no_unknown(c, {"weight", "m0", "m1"}, path)
            comps.append(
                (
                    _as_float(_require(c, "weight", path), f"{path}.weight"),
                    _as_point(_require(c, "m0", path), f"{path}.m0"),
                    _as_point(_require(c, "m1", path), f"{path}.m1"),
                )
            )
        dims = {len(c[1]) for c in comps} | {len(c[2]) for c in comps}
        if len(dims) != 1:
            raise ConfigError("family.components must share one dimension")
        return FamilySpec(
            kind=kind,
            dim=dims.pop(),
            components=tuple(comps),
            s_sq=_as_float(table.get("s_sq", 1.0), "family.s_sq"),
            schedule=str(table.get("schedule", "smoothstep")),
            t_lo=_as_float(table.get("t_lo", 0.0), "family.t_lo"),
            t_hi=_as_float(table.get("t_hi", 1.0), "family.t_hi"),
        )
    if kind == "sign-flipped-stub":
        _no_unknown(table, {"kind", "dim"}, "family")
        return FamilySpec(kind=kind, dim=_as_int(table.get("dim", 1), "family.dim"))
    raise ConfigError(
        f"family.kind must be 'gaussian-path', 'gaussian-mixture-path' or "
        f"'sign-flipped-stub', got {kind!r}"
    )


def _parse_solver(table: dict, dim: int) -> SolverSpec:
    _no_unknown(table, {"n", "padding_sigmas", "dt", "safety"}, "solver")
    n_raw = _require(table, "n", "solver")
    if isinstance(n_raw, int) and not isinstance(n_raw, bool):
        n = (n_raw,) * dim
    elif isinstance(n_raw, list) and all(isinstance(x, int) and not isinstance(x, bool) for x in n_raw):
        n = tuple(n_raw)
    else:
        raise ConfigError("solver.n must be an integer or list of integers")
    if len(n) != dim:
        raise ConfigError(f"solver.n needs {dim} entries for a {dim}D family")
    dt = table.get("dt")
    if dt is not None:
        dt = _as_float(dt, "solver.dt")
        if dt <= 0.0:
            raise ConfigError("solver.dt must be positive (omit it for automatic choice)")
    return SolverSpec(
        n=n,
        padding_sigmas=_as_float(table.get("padding_sigmas", 8.0), "solver.padding_sigmas"),
        dt=dt,
        safety=_as_float(table.get("safety", 0.9), "solver.safety"),
    )


def _parse_simulation(table: dict) -> SimulationSpec:
    _no_unknown(
        table,
        {"n_particles", "seed", "dt", "diffusion_coefficient", "workers", "comparison_grid_n", "with_grid"},
        "simulation",
    )
    dc = _as_float(table.get("diffusion_coefficient", 2.0), "simulation.diffusion_coefficient")
    if dc not in (1.0, 2.0):
        raise ConfigError("simulation.diffusion_coefficient must be 1.0 or 2.0")
    return SimulationSpec(
        n_particles=_as_int(table.get("n_particles", 10000), "simulation.n_particles"),
        seed=_as_int(table.get("seed", 0), "simulation.seed"),
        dt=_as_float(table.get("dt", 1e-3), "simulation.dt"),
        diffusion_coefficient=dc,
        workers=_as_int(table.get("workers", 1), "simulation.workers"),
        comparison_grid_n=_as_int(table.get("comparison_grid_n", 64), "simulation.comparison_grid_n"),
        with_grid=_as_bool(table.get("with_grid", True), "simulation.with_grid"),
    )


def _parse_diagnostics(table: dict) -> DiagnosticsSpec:
    _no_unknown(
        table,
        {"t0", "t1", "n_checkpoints", "tolerance", "dt_ode", "envelope_c1", "envelope_c2"},
        "diagnostics",
    )
    c1 = table.get("envelope_c1")
    c2 = table.get("envelope_c2")
    if (c1 is None) != (c2 is None):
        raise ConfigError("diagnostics.envelope_c1 and envelope_c2 must be given together")
    spec = DiagnosticsSpec(
        t0=_as_float(table.get("t0", 0.0), "diagnostics.t0"),
        t1=_as_float(table.get("t1", 1.0), "diagnostics.t1"),
        n_checkpoints=_as_int(table.get("n_checkpoints", 11), "diagnostics.n_checkpoints"),
        tolerance=_as_float(table.get("tolerance", 5e-3), "diagnostics.tolerance"),
        dt_ode=_as_float(table.get("dt_ode", 1e-3), "diagnostics.dt_ode"),
        envelope_c1=None if c1 is None else _as_float(c1, "diagnostics.envelope_c1"),
        envelope_c2=None if c2 is None else _as_float(c2, "diagnostics.envelope_c2"),
    )
    if spec.t1 < spec.t0:
        raise ConfigError("diagnostics.t1 must not precede diagnostics.t0")
    if spec.n_checkpoints < 3:
        raise ConfigError("diagnostics.n_checkpoints must be at least 3")
    return spec


def _parse_initial(table: dict) -> InitialSpec:
    _no_unknown(table, {"mean", "sigma_sq"}, "initial")
    sigma_sq = _as_float(table.get("sigma_sq", 1.0), "initial.sigma_sq")
    if sigma_sq <= 0.0:
        raise ConfigError("initial.sigma_sq must be positive")
    return InitialSpec(
        mean=_as_point(table.get("mean", 0.0), "initial.mean"),
        sigma_sq=sigma_sq,
    )


def _parse_assumptions(table: dict) -> AssumptionsSpec:
    _no_unknown(
        table, {"box_lo", "box_hi", "times", "target_a", "b_max", "seed"}, "assumptions"
    )
    lo = _as_point(table.get("box_lo", -5.0), "assumptions.box_lo")
    hi = _as_point(table.get("box_hi", 5.0), "assumptions.box_hi")
    if len(lo) != len(hi):
        raise ConfigError("assumptions.box_lo and box_hi must have the same dimension")
    times_raw = table.get("times", [0.5])
    if not isinstance(times_raw, list) or not times_raw:
        raise ConfigError("assumptions.times must be a nonempty list")
    return AssumptionsSpec(
        box_lo=lo,
        box_hi=hi,
        times=tuple(_as_float(t, "assumptions.times") for t in times_raw),
        target_a=_as_float(table.get("target_a", 0.25), "assumptions.target_a"),
        b_max=_as_float(table.get("b_max", 10.0), "assumptions.b_max"),
        seed=_as_int(table.get("seed", 0), "assumptions.seed"),
    )


def _parse_output(table: dict) -> OutputSpec:
    _no_unknown(table, {"directory", "csv", "plots"}, "output")
    directory = table.get("directory", "out")
    if not isinstance(directory, str):
        raise ConfigError("output.directory must be a string")
    return OutputSpec(
        directory=directory,
        csv=_as_bool(table.get("csv", True), "output.csv"),
        plots=_as_bool(table.get("plots", False), "output.plots"),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML experiment configuration file."""
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config file is not valid TOML: {e}")

    _no_unknown(
        raw,
        {"family", "solver", "simulation", "diagnostics", "initial", "assumptions", "output"},
        "config",
    )
    for section in raw:
        if not isinstance(raw[section], dict):
            raise ConfigError(f"{section} must be a table")
    if "family" not in raw:
        raise ConfigError("missing required section [family]")
    family = _parse_family(raw["family"])
    if "solver" not in raw:
        raise ConfigError("missing required section [solver]")
    return ExperimentConfig(
        family=family,
        solver=_parse_solver(raw["solver"], family.dim),
        simulation=_parse_simulation(raw.get("simulation", {})),
        diagnostics=_parse_diagnostics(raw.get("diagnostics", {})),
        initial=_parse_initial(raw.get("initial", {})),
        assumptions=_parse_assumptions(raw.get("assumptions", {})),
        output=_parse_output(raw.get("output", {})),
    )


def build_family(spec: FamilySpec) -> TargetFamily:
    """Construct the target family a FamilySpec describes."""
    if spec.kind == "gaussian-path":
        return make_gaussian_path(
            m0=np.array(spec.m0),
            m1=np.array(spec.m1),
            s0_sq=spec.s0_sq,
            s1_sq=spec.s1_sq,
            schedule=spec.schedule,
            t_lo=spec.t_lo,
            t_hi=spec.t_hi,
        )
    if spec.kind == "gaussian-mixture-path":
        return make_gaussian_mixture_path(
            components=[(w, np.array(m0), np.array(m1)) for w, m0, m1 in spec.components],
            s_sq=spec.s_sq,
            schedule=spec.schedule,
            t_lo=spec.t_lo,
            t_hi=spec.t_hi,
        )
    if spec.kind == "sign-flipped-stub":
        return SignFlippedGaussianStub(dim=spec.dim)
    raise ConfigError(f"unknown family kind {spec.kind!r}")
