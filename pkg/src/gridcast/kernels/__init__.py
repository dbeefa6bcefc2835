"""Elementwise math kernels with a compiled core and a NumPy fallback.

The compiled extension (``gridcast.kernels._fast``) is picked at import when
available; otherwise the NumPy implementation serves. ``GRIDCAST_KERNELS``
(``cython`` | ``numpy``) overrides the choice, and :func:`use_backend` swaps
it at runtime (used by the benchmark and the golden-payload tests).

Matrix products are delegated to BLAS through NumPy in both backends; only
the activation loops are worth compiling.
"""
from __future__ import annotations

import os

from . import _numpy_backend

try:
    from . import _fast as _cython_backend
except ImportError:
    _cython_backend = None

_BACKENDS = {"numpy": _numpy_backend}
if _cython_backend is not None:
    _BACKENDS["cython"] = _cython_backend

_impl = None
_active = ""


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active


def use_backend(name: str) -> str:
    """Select the kernel backend by name; returns the previously active one."""
    global _impl, _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {available_backends()}")
    previous = _active
    _impl = _BACKENDS[name]
    _active = name
    return previous


def sigmoid(x):
    return _impl.sigmoid(x)


def sigmoid_grad(y, g):
    return _impl.sigmoid_grad(y, g)


def tanh(x):
    return _impl.tanh(x)


def tanh_grad(y, g):
    return _impl.tanh_grad(y, g)


def softplus(x):
    return _impl.softplus(x)


def softplus_grad(x, g):
    return _impl.softplus_grad(x, g)


def leaky_relu(x, alpha):
    return _impl.leaky_relu(x, alpha)


def leaky_relu_grad(x, g, alpha):
    return _impl.leaky_relu_grad(x, g, alpha)


_requested = os.environ.get("GRIDCAST_KERNELS", "").strip().lower()
if _requested:
    use_backend(_requested)
else:
    use_backend("cython" if "cython" in _BACKENDS else "numpy")
