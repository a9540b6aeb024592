import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhwave import _kernels as K


def test_taylor_recurrence_parity():
    a = K.taylor_recurrence_loop(40)
    b = K.taylor_recurrence_numpy(40)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-13, atol=1e-15)


def test_diagonal_recurrence_parity():
    assert np.allclose(K.diagonal_recurrence_loop(80), K.diagonal_recurrence_numpy(80),
                       rtol=1e-13, atol=0)


@pytest.mark.parametrize("n", [1, 4, 9, 30])
def test_series_parity(n):
    assert K.e_partial_loop(n, 5000) == pytest.approx(K.e_partial_numpy(n, 5000), rel=1e-14)
    assert K.d_sum_loop(n) == pytest.approx(K.d_sum_numpy(n), rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 6), st.integers(2, 12))
def test_assemble_parity(seed, Ku, N):
    rng = np.random.default_rng(seed)
    half = rng.standard_normal(Ku) + 1j * rng.standard_normal(Ku)
    uhat = np.concatenate([np.conj(half[::-1]), [0.0], half])
    modes = np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)])
    v = float(rng.standard_normal())
    assert np.allclose(K.assemble_L_loop(modes, uhat, v), K.assemble_L_numpy(modes, uhat, v),
                       rtol=0, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 15))
def test_triple_min_parity(seed, n):
    lam = np.random.default_rng(seed).standard_normal(n) * 1j
    a = K.triple_min_loop(lam)
    b = K.triple_min_numpy(lam)
    assert a[0] == pytest.approx(b[0], abs=1e-15)
    assert abs(lam[a[1]] + lam[a[2]] + lam[a[3]]) == pytest.approx(a[0])


def test_env_selects_numpy_path():
    env = dict(os.environ, BHWAVE_NUMBA="0")
    code = ("from bhwave import _kernels as K; "
            "print(K.USE_NUMBA, K.assemble_L is K.assemble_L_numpy)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    assert out == ["False", "True"]
