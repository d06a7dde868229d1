"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imported cleanly and the
``CRYPTOFLOW_PURE_PYTHON`` environment variable is unset/0; otherwise
the numpy implementation takes over.  ``BACKEND`` records which one is
live.  Both expose the same four functions:

* ``kl_step(indptr, indices, data, S, D, eps)`` — one in-place
  multiplicative KL-NMF update (S first, then D) driven by the CSR
  nonzero pattern;
* ``kl_objective(indptr, indices, data, S, D, eps)`` — generalized KL
  divergence between the CSR matrix and ``S @ D``;
* ``union_pairs(parent, size, left, right)`` — batched in-place
  union-find unions;
* ``find_roots(parent)`` — path-compressed root array.
"""

from __future__ import annotations

import os

from . import _fallback


def _want_pure_python() -> bool:
    return os.environ.get("CRYPTOFLOW_PURE_PYTHON", "").strip() not in ("", "0")


def get_backend(name: str):
    """Return a kernel module by name ('compiled' or 'python')."""
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _speedups  # may raise ImportError

        return _speedups
    raise ValueError(f"unknown kernel backend {name!r}")


if _want_pure_python():
    _impl = _fallback
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

BACKEND: str = _impl.BACKEND
kl_step = _impl.kl_step
kl_objective = _impl.kl_objective
union_pairs = _impl.union_pairs
find_roots = _impl.find_roots

__all__ = [
    "BACKEND",
    "get_backend",
    "kl_step",
    "kl_objective",
    "union_pairs",
    "find_roots",
]
