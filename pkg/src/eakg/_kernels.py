"""Window sieve used by the prime offset search.

The numba path is used when numba imports cleanly and ``EAKG_DISABLE_NUMBA``
is unset (or ``0``).  Both paths produce identical masks.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("EAKG_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by EAKG_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised by the fallback CI leg
    HAS_NUMBA = False


def sieve_window_numpy(width: int, moduli: np.ndarray, starts: np.ndarray) -> np.ndarray:
    mask = np.ones(width, dtype=np.bool_)
    for m, s in zip(moduli.tolist(), starts.tolist()):
        mask[s::m] = False
    return mask


if HAS_NUMBA:

    @njit(cache=True)
    def _sieve_window_jit(width, moduli, starts):
        mask = np.ones(width, dtype=np.bool_)
        for j in range(moduli.shape[0]):
            m = moduli[j]
            i = starts[j]
            while i < width:
                mask[i] = False
                i += m
        return mask

    def sieve_window_numba(width: int, moduli: np.ndarray, starts: np.ndarray) -> np.ndarray:
        return _sieve_window_jit(width, moduli, starts)

    sieve_window = sieve_window_numba
else:
    sieve_window_numba = None
    sieve_window = sieve_window_numpy

BACKEND = "numba" if HAS_NUMBA else "numpy"


def window_starts(base: int, moduli: np.ndarray, forbidden: np.ndarray) -> np.ndarray:
    """Offset of the first ``d >= 0`` with ``(base + d) % m == forbidden``, per modulus.

    ``base`` may be an arbitrarily large Python int; the reduction happens
    here so the kernels only ever see int64.
    """
    out = np.empty(moduli.shape[0], dtype=np.int64)
    for j, (m, f) in enumerate(zip(moduli.tolist(), forbidden.tolist())):
        out[j] = (f - base) % m
    return out
