"""Compare the compiled and pure-Python kernel backends.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Both backends produce bit-identical RNG output and agree on solver
steps to floating-point rounding; this script only measures speed.
"""

from __future__ import annotations

import time

import numpy as np

from klflow import _kernels_py

try:
    from klflow import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _time(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_philox(mod, streams: int, blocks: int) -> float:
    s = np.arange(streams, dtype=np.uint64)
    return _time(mod.philox_bits, 12345, 7, s, blocks)


def bench_fp_1d(mod, n: int, steps: int) -> float:
    rng = np.random.default_rng(0)
    q = rng.random(n)
    q /= q.sum()
    w = rng.standard_normal(n - 1)

    def run():
        qq = q
        for _ in range(steps):
            qq, _ = mod.fp_step_1d(qq, w, 1e-5, 0.01)

    return _time(run)


def bench_fp_2d(mod, n: int, steps: int) -> float:
    rng = np.random.default_rng(0)
    q = rng.random((n, n))
    q /= q.sum()
    wx = rng.standard_normal((n - 1, n))
    wy = rng.standard_normal((n, n - 1))

    def run():
        qq = q
        for _ in range(steps):
            qq, _ = mod.fp_step_2d(qq, wx, wy, 1e-6, 0.01, 0.01)

    return _time(run)


def main() -> None:
    cases = [
        ("philox 1e6 streams x 2 blocks", bench_philox, (1_000_000, 2)),
        ("fp_step_1d n=4096 x 200 steps", bench_fp_1d, (4096, 200)),
        ("fp_step_2d 256x256 x 50 steps", bench_fp_2d, (256, 50)),
    ]
    mods = [("python", _kernels_py)]
    if _kernels_c is not None:
        mods.append(("compiled", _kernels_c))
    else:
        print("compiled backend not available; showing python only\n")

    width = max(len(name) for name, _, _ in cases)
    for name, fn, args in cases:
        times = {label: fn(mod, *args) for label, mod in mods}
        line = f"{name:<{width}}"
        for label, t in times.items():
            line += f"  {label}: {t * 1e3:9.2f} ms"
        if len(times) == 2:
            line += f"  speedup: {times['python'] / times['compiled']:5.1f}x"
        print(line)


if __name__ == "__main__":
    main()
