"""Log-posterior kernel backends.

The hot loop of sampling is one fused evaluation of the unnormalized log
posterior and its gradient in unconstrained space. Two interchangeable
implementations exist: a compiled Cython extension and a pure numpy
reference. The extension is used when importable; set PREFBAYES_PURE_PY=1
to force the reference path. Both are exercised against each other in the
test suite, and benchmarks/bench_kernel.py compares their speed.
"""

import os

from . import reference

try:
    from . import _fastkernel  # type: ignore[attr-defined]

    _HAVE_FAST = True
except ImportError:
    _fastkernel = None
    _HAVE_FAST = False


def available_backends() -> list[str]:
    return ["cython", "python"] if _HAVE_FAST else ["python"]


def active_backend(requested: str | None = None) -> str:
    if requested is not None:
        if requested not in ("cython", "python"):
            raise ValueError(f"unknown backend {requested!r}")
        if requested == "cython" and not _HAVE_FAST:
            raise RuntimeError("compiled kernel not available")
        return requested
    if os.environ.get("PREFBAYES_PURE_PY"):
        return "python"
    return "cython" if _HAVE_FAST else "python"


def make_impl(data, requested: str | None = None):
    """Bind the precomputed kernel data, returning callable(x) -> (logp, grad)."""
    if active_backend(requested) == "cython":
        return _fastkernel.FastKernel(data)

    def _impl(x):
        return reference.logp_and_grad(x, data)

    return _impl
