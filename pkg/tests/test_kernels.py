import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eakg import _kernels, rsa

needs_numba = pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba unavailable")


def _naive_mask(width, moduli, starts):
    return np.array(
        [all((i - s) % m != 0 or i < s for m, s in zip(moduli, starts)) for i in range(width)]
    )


def test_window_starts():
    moduli = np.array([3, 5, 7], dtype=np.int64)
    forbidden = np.array([0, 1, 6], dtype=np.int64)
    starts = _kernels.window_starts(100, moduli, forbidden)
    for m, f, s in zip(moduli, forbidden, starts):
        assert 0 <= s < m and (100 + s) % m == f


def test_numpy_matches_naive():
    moduli = np.array([3, 5, 7, 11], dtype=np.int64)
    starts = np.array([0, 2, 6, 1], dtype=np.int64)
    assert (_kernels.sieve_window_numpy(60, moduli, starts) == _naive_mask(60, moduli, starts)).all()


@needs_numba
@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2**20, max_value=2**200), st.sampled_from([3, 65537]), st.integers(10, 3000))
def test_numba_matches_numpy(total, e, width):
    moduli, forbidden = rsa._sieve_moduli(total, width, e)
    starts = _kernels.window_starts(total, moduli, forbidden)
    a = _kernels.sieve_window_numpy(width, moduli, starts)
    b = _kernels.sieve_window_numba(width, moduli, starts)
    assert a.dtype == b.dtype and (a == b).all()


def test_env_flag_selects_fallback():
    code = "from eakg import _kernels, rsa; print(_kernels.BACKEND, rsa.find_delta(45, 100, 3))"
    env = dict(os.environ, EAKG_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "2"]
