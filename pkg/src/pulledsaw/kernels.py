"""Kernel selection.

The compiled extension is used when importable; otherwise (or when
``PULLEDSAW_PURE_PYTHON=1``) the pure-Python fallback is used.  Both expose
``count_walks`` and ``flatperm_batch`` with identical results.
"""
import os

from pulledsaw import _pykernels as pure
from pulledsaw._pykernels import (  # noqa: F401
    FULL,
    POSITIVE,
    UNFOLDED,
    KernelOverflow,
    NodeLimitExceeded,
    directions,
)

try:
    from pulledsaw import _ckernels as compiled
except ImportError:  # pragma: no cover - depends on the build
    compiled = None

if compiled is not None and not os.environ.get("PULLEDSAW_PURE_PYTHON"):
    active = compiled
else:
    active = pure

IMPLEMENTATION = active.IMPLEMENTATION
HAVE_COMPILED = compiled is not None


def count_walks(d, n_max, cls, prefix=(), symmetric=False, node_limit=0):
    return active.count_walks(d, n_max, cls, tuple(prefix), symmetric, node_limit)


def flatperm_batch(d, n_max, tours, key):
    return active.flatperm_batch(d, n_max, tours, key)
