"""Kernel backend selection.

The compiled extension (``_native``) is preferred when it imported
cleanly; the pure-numpy module (``python_ref``) is always available as a
fallback.  Set ``DRRTRACE_BACKEND=python`` to force the fallback or
``DRRTRACE_BACKEND=native`` to fail loudly when the extension is missing.
"""

from __future__ import annotations

import importlib
import os

from ..errors import InvalidArgumentError
from . import python_ref

_native = None
_native_error: Exception | None = None

_requested = os.environ.get("DRRTRACE_BACKEND", "auto").strip().lower()
if _requested not in ("python",):
    try:
        _native = importlib.import_module("._native", __package__)
    except ImportError as exc:
        _native = None
        _native_error = exc
        if _requested == "native":
            raise ImportError(
                "DRRTRACE_BACKEND=native but the compiled kernels are not built; "
                "run `pip install -e . --no-build-isolation`"
            ) from exc

DEFAULT_BACKEND = "native" if _native is not None else "python"


def available_backends() -> tuple[str, ...]:
    return ("native", "python") if _native is not None else ("python",)


def get_backend(name: str | None = None):
    """The kernel module for ``name`` (or the default backend)."""
    name = name or DEFAULT_BACKEND
    if name == "python":
        return python_ref
    if name == "native":
        if _native is None:
            raise InvalidArgumentError(
                f"native backend is not available ({_native_error})"
            )
        return _native
    raise InvalidArgumentError(f"unknown backend {name!r}, expected 'native' or 'python'")
