"""Hot numeric loops.

Every kernel exists twice: a loop version compiled with numba ``@njit`` and a
pure-numpy version.  The numba path is used when numba imports and the
environment variable ``BHWAVE_NUMBA`` is not ``"0"``.  Both paths are always
importable (``*_loop`` / ``*_numpy``) so tests and the benchmark can compare
them.
"""
import os

import numpy as np

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f

USE_NUMBA = _HAVE_NUMBA and os.environ.get("BHWAVE_NUMBA", "1") != "0"


# ---------------------------------------------------------------------------
# wave Taylor recurrence, floating point


@njit(cache=True)
def taylor_recurrence_loop(nmax):
    U = np.zeros((nmax + 1, nmax + 2))
    V = np.zeros(nmax + 1)
    V[0] = -1.0
    U[1, 1] = 1.0
    for n in range(2, nmax + 1):
        acc = 0.0
        for m in range(1, n):
            for l in range(1, min(m, n - m - 1) + 1):
                acc += U[m, l] * U[n - m, 1 + l]
        V[n - 1] = 0.5 * acc
        for k in range(n, 1, -2):
            s1 = 0.0
            for m in range(1, n - k + 1):
                s1 += V[m] * U[n - m, k]
            s2 = 0.0
            s3 = 0.0
            for m in range(1, n):
                for l in range(max(1, k - n + m), min(m, k - 1) + 1):
                    s2 += U[m, l] * U[n - m, k - l]
                for l in range(1, min(m, n - m - k) + 1):
                    s3 += U[m, l] * U[n - m, k + l]
            U[n, k] = (k * s1 - 0.25 * k * s2 - 0.5 * k * s3) / (k - 1)
    return U[:, :nmax + 1], V


def taylor_recurrence_numpy(nmax):
    U = np.zeros((nmax + 1, nmax + 2))
    V = np.zeros(nmax + 1)
    V[0] = -1.0
    U[1, 1] = 1.0
    for n in range(2, nmax + 1):
        acc = 0.0
        for m in range(1, n):
            top = min(m, n - m - 1)
            if top >= 1:
                acc += U[m, 1:top + 1] @ U[n - m, 2:top + 2]
        V[n - 1] = 0.5 * acc
        for k in range(n, 1, -2):
            s1 = V[1:n - k + 1] @ U[n - 1:k - 1:-1, k] if n > k else 0.0
            s2 = 0.0
            s3 = 0.0
            for m in range(1, n):
                lo, hi = max(1, k - n + m), min(m, k - 1)
                if hi >= lo:
                    s2 += U[m, lo:hi + 1] @ U[n - m, k - lo:k - hi - 1:-1]
                top = min(m, n - m - k)
                if top >= 1:
                    s3 += U[m, 1:top + 1] @ U[n - m, k + 1:k + top + 1]
            U[n, k] = (k * s1 - 0.25 * k * s2 - 0.5 * k * s3) / (k - 1)
    return U[:, :nmax + 1], V


# ---------------------------------------------------------------------------
# diagonal coefficients u_{n,n}


@njit(cache=True)
def diagonal_recurrence_loop(nmax):
    d = np.zeros(nmax + 1)
    d[1] = 1.0
    for n in range(2, nmax + 1):
        acc = 0.0
        for k in range(1, n):
            acc += (n - k) * d[k] * d[n - k]
        d[n] = 0.5 * acc / (1 - n)
    return d


def diagonal_recurrence_numpy(nmax):
    d = np.zeros(nmax + 1)
    d[1] = 1.0
    for n in range(2, nmax + 1):
        k = np.arange(1, n)
        d[n] = 0.5 * np.sum((n - k) * d[1:n] * d[n - 1:0:-1]) / (1 - n)
    return d


# ---------------------------------------------------------------------------
# series for the bilinear-lemma constants


@njit(cache=True)
def e_partial_loop(n, K):
    # summed from the small end up to keep the tail's rounding below 1e-16
    acc = 0.0
    for k in range(K, 0, -1):
        acc += (n / (k * (k + n))) ** 2
    return acc


def e_partial_numpy(n, K):
    k = np.arange(K, 0, -1, dtype=float)
    return float(np.sum((n / (k * (k + n))) ** 2))


@njit(cache=True)
def d_sum_loop(n):
    acc = 0.0
    for k in range(1, n - 2):
        acc += (n / (k * (n - k - 2))) ** 2
    return acc


def d_sum_numpy(n):
    if n < 4:
        return 0.0
    k = np.arange(1, n - 2, dtype=float)
    return float(np.sum((n / (k * (n - k - 2))) ** 2))


# ---------------------------------------------------------------------------
# L_eps in the exponential basis


@njit(cache=True)
def assemble_L_loop(modes, uhat, v):
    """``L g = -v g' + H g + (u g)'`` on the basis ``e^{i m x}``, ``m in modes``.

    ``uhat[K + j]`` holds the coefficient of ``e^{ijx}`` in ``u``, ``|j| <= K``.
    """
    n = modes.shape[0]
    K = (uhat.shape[0] - 1) // 2
    A = np.zeros((n, n), dtype=np.complex128)
    for a in range(n):
        m = modes[a]
        for b in range(n):
            j = modes[b]
            d = m - j
            if -K <= d <= K:
                A[a, b] = 1j * m * uhat[K + d]
        A[a, a] += -1j * v * m - 1j * np.sign(m)
    return A


def assemble_L_numpy(modes, uhat, v):
    K = (len(uhat) - 1) // 2
    d = modes[:, None] - modes[None, :]
    band = np.abs(d) <= K
    A = np.zeros(d.shape, dtype=complex)
    A[band] = uhat[K + d[band]]
    A *= 1j * modes[:, None]
    A[np.diag_indices_from(A)] += -1j * v * modes - 1j * np.sign(modes)
    return A


# ---------------------------------------------------------------------------
# three-eigenvalue resonance scan


@njit(cache=True)
def triple_min_loop(lam):
    """Minimum of ``|lam[a] + lam[b] + lam[c]|`` over ``a <= b <= c``."""
    n = lam.shape[0]
    best = np.inf
    ia = ib = ic = -1
    for a in range(n):
        for b in range(a, n):
            s = lam[a] + lam[b]
            for c in range(b, n):
                val = abs(s + lam[c])
                if val < best:
                    best = val
                    ia, ib, ic = a, b, c
    return best, ia, ib, ic


def triple_min_numpy(lam):
    tot = np.abs(lam[:, None, None] + lam[None, :, None] + lam[None, None, :])
    a, b, c = np.unravel_index(np.argmin(tot), tot.shape)
    idx = sorted((int(a), int(b), int(c)))
    return float(tot[a, b, c]), idx[0], idx[1], idx[2]


if USE_NUMBA:
    taylor_recurrence = taylor_recurrence_loop
    diagonal_recurrence = diagonal_recurrence_loop
    e_partial = e_partial_loop
    d_sum = d_sum_loop
    assemble_L = assemble_L_loop
    triple_min = triple_min_loop
else:
    taylor_recurrence = taylor_recurrence_numpy
    diagonal_recurrence = diagonal_recurrence_numpy
    e_partial = e_partial_numpy
    d_sum = d_sum_numpy
    assemble_L = assemble_L_numpy
    triple_min = triple_min_numpy
