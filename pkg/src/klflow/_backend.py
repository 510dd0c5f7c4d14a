"""Kernel backend selection.

The package ships two implementations of its hot kernels: a compiled
Cython extension (``klflow._kernels``) and a pure-numpy reference
(``klflow._kernels_py``). Both expose the same functions and produce
bit-identical counter-RNG output; the finite-volume steps agree to
floating-point rounding.

Selection happens once at import time. The environment variable
``KLFLOW_KERNELS`` overrides the default:

* ``auto`` (or unset): compiled if importable, else python
* ``compiled``: require the extension, raise if missing
* ``python``: force the numpy reference
"""

from __future__ import annotations

import os

from . import _kernels_py

_choice = os.environ.get("KLFLOW_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "compiled", "python"):
    raise ImportError(
        f"KLFLOW_KERNELS must be 'auto', 'compiled' or 'python', got {_choice!r}"
    )

if _choice == "python":
    kernels = _kernels_py
elif _choice == "compiled":
    from . import _kernels as kernels  # type: ignore[no-redef]
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py

#: Which implementation is active: "compiled" or "python".
KERNEL_IMPLEMENTATION: str = kernels.IMPLEMENTATION

philox_bits = kernels.philox_bits
fp_step_1d = kernels.fp_step_1d
fp_step_2d = kernels.fp_step_2d
