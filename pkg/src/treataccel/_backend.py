"""Backend selection: compiled kernels when importable, numpy otherwise.

TREATACCEL_BACKEND=python forces the numpy path, =compiled demands the
extension (ImportError if absent), =auto (default) prefers the extension.
Resolution happens once at import; each sweep is looked up by name so a
partially built extension falls back per function.
"""

from __future__ import annotations

import os

from . import _purepy

_choice = os.environ.get("TREATACCEL_BACKEND", "auto").lower()
if _choice not in ("auto", "python", "compiled"):
    raise ImportError(f"TREATACCEL_BACKEND must be auto, python or compiled, "
                      f"got {_choice!r}")

_compiled = None
if _choice != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        if _choice == "compiled":
            raise
        _compiled = None


def resolve(name: str):
    if _compiled is not None and hasattr(_compiled, name):
        return getattr(_compiled, name)
    return getattr(_purepy, name)


def backend_name() -> str:
    return "compiled" if _compiled is not None else "python"


aalen_sweep = resolve("aalen_sweep")
weight_na_sweep = resolve("weight_na_sweep")
