"""Serialization for densities, ensembles, and diagnostics records.

Two interchangeable layouts per object, both stable across versions:

Binary density (magic ``KLFDENS1``), little-endian:
    magic[8] | uint32 d | float64 t | d x (float64 lo, float64 hi,
    uint32 n) | float64 values, row-major.

Binary ensemble (magic ``KLFENSB1``), little-endian:
    magic[8] | uint32 d | uint64 n | float64 t | uint64 seed |
    uint64 step_index | uint64 streams[n] | float64 positions[n*d],
    row-major.

CSV variants carry the same header fields on ``#``-prefixed lines and
one record per row, values printed with repr so floats round-trip
exactly. All writes are atomic: a temp file in the target directory is
renamed over the destination, so readers never observe a partial file.
"""

from __future__ import annotations

import csv
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsRecord
from .grid import Axis, Grid, GridDensity
from .sde import ParticleEnsemble

__all__ = [
    "atomic_write",
    "write_density", "read_density",
    "write_density_csv", "read_density_csv",
    "write_ensemble", "read_ensemble",
    "write_ensemble_csv", "read_ensemble_csv",
    "write_records_csv", "read_records_csv",
]

DENSITY_MAGIC = b"KLFDENS1"
ENSEMBLE_MAGIC = b"KLFENSB1"

_U64_MASK = (1 << 64) - 1


class atomic_write:
    """Context manager: write to a temp file, rename over target on success."""

    def __init__(self, path: str | Path, binary: bool = False):
        self.path = Path(path)
        self.binary = binary
        self._tmp = None
        self.file = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=self.path.name + ".tmp")
        self._tmp = tmp
        mode = "wb" if self.binary else "w"
        self.file = os.fdopen(fd, mode, newline="" if not self.binary else None)
        return self.file

    def __exit__(self, exc_type, exc, tb):
        self.file.close()
        if exc_type is None:
            os.replace(self._tmp, self.path)
        else:
            os.unlink(self._tmp)
        return False


def write_density(density: GridDensity, path: str | Path) -> None:
    grid = density.grid
    with atomic_write(path, binary=True) as f:
        f.write(DENSITY_MAGIC)
        f.write(struct.pack("<Id", grid.dim, density.t))
        for ax in grid.axes:
            f.write(struct.pack("<ddI", ax.lo, ax.hi, ax.n))
        f.write(np.ascontiguousarray(density.values, dtype="<f8").tobytes())


def read_density(path: str | Path) -> GridDensity:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != DENSITY_MAGIC:
            raise ValueError(f"{path}: not a density file (bad magic {magic!r})")
        d, t = struct.unpack("<Id", f.read(12))
        axes = []
        for _ in range(d):
            lo, hi, n = struct.unpack("<ddI", f.read(20))
            axes.append(Axis(lo, hi, n))
        grid = Grid(tuple(axes))
        values = np.frombuffer(f.read(8 * grid.n_cells), dtype="<f8").reshape(grid.shape)
        return GridDensity(grid, t, values.astype(np.float64))


def write_density_csv(density: GridDensity, path: str | Path) -> None:
    grid = density.grid
    with atomic_write(path) as f:
        f.write("# klflow-density v1\n")
        f.write(f"# d={grid.dim}\n")
        f.write(f"# t={float(density.t)!r}\n")
        for k, ax in enumerate(grid.axes):
            f.write(f"# axis{k} lo={ax.lo!r} hi={ax.hi!r} n={ax.n}\n")
        f.write("# columns: value (row-major)\n")
        for v in density.values.ravel():
            f.write(f"{float(v)!r}\n")


def read_density_csv(path: str | Path) -> GridDensity:
    header: dict[str, str] = {}
    axes_raw: dict[int, tuple[float, float, int]] = {}
    values = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("axis"):
                    name, fields_ = body.split(" ", 1)
                    parts = dict(p.split("=") for p in fields_.split())
                    axes_raw[int(name[4:])] = (
                        float(parts["lo"]), float(parts["hi"]), int(parts["n"]),
                    )
                elif "=" in body:
                    key, _, val = body.partition("=")
                    header[key.strip()] = val.strip()
                continue
            values.append(float(line))
    if "d" not in header or "t" not in header:
        raise ValueError(f"{path}: missing density header lines")
    d = int(header["d"])
    axes = tuple(Axis(*axes_raw[k]) for k in range(d))
    grid = Grid(axes)
    arr = np.asarray(values, dtype=float).reshape(grid.shape)
    return GridDensity(grid, float(header["t"]), arr)


def write_ensemble(e: ParticleEnsemble, path: str | Path) -> None:
    with atomic_write(path, binary=True) as f:
        f.write(ENSEMBLE_MAGIC)
        f.write(struct.pack("<IQdQQ", e.dim, e.n, e.t, e.seed & _U64_MASK, e.step_index))
        f.write(np.ascontiguousarray(e.streams, dtype="<u8").tobytes())
        f.write(np.ascontiguousarray(e.positions, dtype="<f8").tobytes())


def read_ensemble(path: str | Path) -> ParticleEnsemble:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != ENSEMBLE_MAGIC:
            raise ValueError(f"{path}: not an ensemble file (bad magic {magic!r})")
        d, n, t, seed, step_index = struct.unpack("<IQdQQ", f.read(36))
        streams = np.frombuffer(f.read(8 * n), dtype="<u8").astype(np.uint64)
        positions = np.frombuffer(f.read(8 * n * d), dtype="<f8").reshape(n, d)
        return ParticleEnsemble(
            positions.astype(np.float64), t, int(seed), streams, int(step_index)
        )


def write_ensemble_csv(e: ParticleEnsemble, path: str | Path) -> None:
    with atomic_write(path) as f:
        f.write("# klflow-ensemble v1\n")
        f.write(f"# d={e.dim}\n")
        f.write(f"# n={e.n}\n")
        f.write(f"# t={float(e.t)!r}\n")
        f.write(f"# seed={e.seed & _U64_MASK}\n")
        f.write(f"# step_index={e.step_index}\n")
        cols = ",".join(f"x{k}" for k in range(e.dim))
        f.write(f"# columns: stream,{cols}\n")
        for s, row in zip(e.streams, e.positions):
            f.write(f"{int(s)}," + ",".join(repr(float(x)) for x in row) + "\n")


def read_ensemble_csv(path: str | Path) -> ParticleEnsemble:
    header: dict[str, str] = {}
    streams = []
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body and not body.startswith("columns"):
                    key, _, val = body.partition("=")
                    header[key.strip()] = val.strip()
                continue
            parts = line.split(",")
            streams.append(int(parts[0]))
            rows.append([float(x) for x in parts[1:]])
    positions = np.asarray(rows, dtype=float)
    return ParticleEnsemble(
        positions,
        float(header["t"]),
        int(header["seed"]),
        np.asarray(streams, dtype=np.uint64),
        int(header["step_index"]),
    )


def write_records_csv(records: list[DiagnosticsRecord], path: str | Path) -> None:
    """The stable 8-column diagnostics series; absent values are empty."""
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(DiagnosticsRecord.CSV_COLUMNS)
        for r in records:
            writer.writerow(r.csv_row())


def read_records_csv(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != DiagnosticsRecord.CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected records header {header}")
        out = []
        for row in reader:
            vals = {k: (None if v == "" else float(v)) for k, v in zip(header, row)}
            out.append(
                DiagnosticsRecord(
                    t=vals["t"],
                    kl=vals["kl"],
                    fisher=vals["fisher"],
                    dt_term=vals["dt_term"],
                    excluded_mass=vals["excluded_mass"] or 0.0,
                    kl_fd=vals["kl_fd"],
                    residual=vals["residual"],
                    relative_residual=vals["relative_residual"],
                )
            )
        return out
