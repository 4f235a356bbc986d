"""Rollout kernels for squared-exponential GP-SSMs.

Two implementations share one signature::

    se_rollouts(x0, noise, X, L, h, sf2, ell) -> states

``x0`` is ``(R, n)``, ``noise`` is ``(R, S, n)`` standard normal draws and
``states`` is ``(R, S + 1, n)``.  ``X`` is ``(m, n)`` training inputs, ``L``
the ``(n, m, m)`` lower Cholesky factors, ``h`` the ``(n, m)`` weight
vectors, ``sf2`` and ``ell`` the per-output signal variances and
lengthscales.

The compiled module ``_native`` is used when it imports; set
``GPSSM_BACKEND=python`` to force the numpy fallback.  Without an explicit
``backend`` the compiled kernel is chosen only for small batches
(``m <= NATIVE_MAX_M`` and ``R * m <= NATIVE_MAX_WORK``).  The fallback does
one BLAS-3 triangular solve across all rollouts per step, which beats the
per-rollout compiled loop once the batch is large.  The thresholds come from
``benchmarks/bench_backends.py`` on a single core.
"""
import os

from ..errors import ConfigError
from . import _fallback

NATIVE_MAX_M = 128
NATIVE_MAX_WORK = 1536

try:
    from . import _native
except ImportError:  # extension not built
    _native = None

if os.environ.get("GPSSM_BACKEND", "").lower() in ("python", "numpy", "fallback"):
    _native = None

BACKEND = "native" if _native is not None else "python"


def se_rollouts(x0, noise, X, L, h, sf2, ell, backend=None):
    if backend not in (None, "native", "python"):
        raise ConfigError(f"unknown backend {backend!r}; expected 'native' or 'python'")
    if backend is None:
        m, R = X.shape[0], len(x0)
        small = m <= NATIVE_MAX_M and R * m <= NATIVE_MAX_WORK
        backend = "native" if _native is not None and small else "python"
    if backend == "native":
        if _native is None:
            raise RuntimeError("compiled backend is not available")
        return _native.se_rollouts(x0, noise, X, L, h, sf2, ell)
    return _fallback.se_rollouts(x0, noise, X, L, h, sf2, ell)
