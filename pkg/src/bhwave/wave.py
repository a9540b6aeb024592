"""Traveling waves ``H u - v u' + u u' = 0`` bifurcating from ``(0, -1)``.

Two routes: the power series in the amplitude ``eps`` built from the
coefficient recurrence, and Newton iteration on the Galerkin-truncated
system with the first cosine coefficient pinned to ``eps``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .spectral import TrigField, norm, product_complex

EXACT_MAX_ORDER = 40
FLOAT_MAX_ORDER = 200


@dataclass(frozen=True)
class WaveTaylor:
    """Coefficients ``u[n][k]`` of ``cos(kx) eps^n`` and ``v[n]`` of ``eps^n``.

    ``u`` is indexed ``u[n][k]`` for ``0 <= k <= n <= nmax`` (row 0 and
    column 0 are zero).  Entries are :class:`~fractions.Fraction` when
    ``exact`` is set, floats otherwise.  ``v`` holds ``v[0..nmax-1]``; the
    recurrence step that produces ``u[n]`` fixes ``v[n-1]``.
    """

    nmax: int
    u: list
    v: list
    exact: bool

    def u_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.u])

    def v_array(self) -> np.ndarray:
        return np.array([float(x) for x in self.v])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "k", "u_nk"])
        for n in range(1, self.nmax + 1):
            for k in range(1, n + 1):
                w.writerow([n, k, _render(self.u[n][k])])
        return buf.getvalue()

    def v_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "v_n"])
        for n, val in enumerate(self.v):
            w.writerow([n, _render(val)])
        return buf.getvalue()


def _render(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return repr(float(x))


def _taylor_exact(nmax: int):
    zero = Fraction(0)
    U = [[zero] * (nmax + 2) for _ in range(nmax + 1)]
    V = [zero] * (nmax + 1)
    V[0] = Fraction(-1)
    if nmax >= 1:
        U[1][1] = Fraction(1)
    for n in range(2, nmax + 1):
        acc = zero
        for m in range(1, n):
            for l in range(1, min(m, n - m - 1) + 1):
                acc += U[m][l] * U[n - m][1 + l]
        V[n - 1] = acc / 2
        for k in range(n, 1, -2):
            s1 = sum((V[m] * U[n - m][k] for m in range(1, n - k + 1)), zero)
            s2 = zero
            s3 = zero
            for m in range(1, n):
                for l in range(max(1, k - n + m), min(m, k - 1) + 1):
                    s2 += U[m][l] * U[n - m][k - l]
                for l in range(1, min(m, n - m - k) + 1):
                    s3 += U[m][l] * U[n - m][k + l]
            U[n][k] = (k * s1 - Fraction(k, 4) * s2 - Fraction(k, 2) * s3) / (k - 1)
    return [row[:nmax + 1] for row in U], V[:nmax]


def taylor_table(nmax: int, exact: bool | None = None) -> WaveTaylor:
    """Fill ``u[n][k]`` and ``v[n]`` from the sin-mode balance at each order.

    For each ``n >= 2`` the ``sin x`` balance fixes ``v[n-1]`` first, then the
    ``sin kx`` balances (``k = n, n-2, ..., >= 2``) are solved for ``u[n][k]``
    through the factor ``(1 - k)``.  Rational arithmetic is the default up to
    ``nmax = 40``.
    """
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    if exact is None:
        exact = nmax <= EXACT_MAX_ORDER
    if exact:
        U, V = _taylor_exact(nmax)
        return WaveTaylor(nmax, U, V, True)
    if nmax > FLOAT_MAX_ORDER:
        raise ValueError(f"nmax > {FLOAT_MAX_ORDER} overflows in double precision")
    U, V = _kernels.taylor_recurrence(nmax)
    return WaveTaylor(nmax, [list(row) for row in U], list(V[:nmax]), False)


# ---------------------------------------------------------------------------
# diagonal coefficients and the radius of convergence


@dataclass(frozen=True)
class DiagonalSeries:
    coefs: np.ndarray           # coefs[n] = u_{n,n}, coefs[0] = 0
    radius_root: float          # |u_{n,n}|^{-1/n} at n = nmax
    radius_ratio: float         # |u_{n-1,n-1} / u_{n,n}| at n = nmax
    radius: float               # finite-size corrected root test


def diagonal_series(nmax: int) -> DiagonalSeries:
    """``(1-n) u_{n,n} = 1/2 Σ_{k<n} (n-k) u_{k,k} u_{n-k,n-k}`` and radius estimates.

    The plain root and ratio tests converge like ``log(n)/n`` and ``1/n``.
    ``radius`` fits ``-log|u_{n,n}|/n = log(1/R) + a log(n)/n + b/n`` by least
    squares over the last eight orders, which removes the algebraic
    prefactor of the coefficients without assuming its exponent.
    """
    if nmax < 3:
        raise ValueError("nmax must be >= 3")
    d = np.asarray(_kernels.diagonal_recurrence(nmax))
    n = nmax
    root = abs(d[n]) ** (-1.0 / n)
    ratio = abs(d[n - 1] / d[n])
    ns = np.arange(max(3, n - 7), n + 1, dtype=float)
    y = -np.log(np.abs(d[ns.astype(int)])) / ns
    A = np.column_stack([np.ones_like(ns), np.log(ns) / ns, 1.0 / ns])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return DiagonalSeries(d, root, ratio, float(np.exp(coef[0])))


# ---------------------------------------------------------------------------
# waves


@dataclass(frozen=True)
class TravelingWave:
    eps: float
    u: TrigField
    v: float
    residual_norm: float
    source: str
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"eps": self.eps, "v": self.v, "residual_norm": self.residual_norm,
                "source": self.source, "iterations": self.iterations,
                "u": self.u.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TravelingWave":
        return cls(d["eps"], TrigField.from_dict(d["u"]), d["v"], d["residual_norm"],
                   d["source"], d.get("iterations", 0))


class NewtonDivergence(RuntimeError):
    """Newton failed to reach the tolerance; carries the iteration history."""

    def __init__(self, eps, history):
        self.eps = eps
        self.history = history
        super().__init__(f"Newton did not converge at eps={eps}: residuals {history[-3:]}")


def wave_residual(u: TrigField, v: float) -> TrigField:
    """``H u - v u' + u u'`` with every mode of the quadratic term kept (``2N`` modes)."""
    N = u.N
    c = u.to_complex(2 * N)
    k = np.arange(2 * N + 1)
    sq = product_complex(c[:N + 1], c[:N + 1], 2 * N)
    r = -1j * np.sign(k) * c - v * 1j * k * c + 0.5j * k * sq
    return TrigField.from_complex(r, 2 * N)


def _residual_norm(u, v) -> float:
    return norm(wave_residual(u, v), "L2")


def eval_taylor(table: WaveTaylor, eps: float, N: int) -> TravelingWave:
    """Sum ``u = Σ eps^n u_n``, ``v = Σ eps^n v_n`` through the table's order."""
    U = table.u_array()
    V = table.v_array()
    a = np.zeros(N)
    powers = eps ** np.arange(table.nmax + 1)
    for kk in range(1, min(N, table.nmax) + 1):
        a[kk - 1] = powers[kk:] @ U[kk:, kk]
    v = float(powers[:len(V)] @ V)
    u = TrigField(0.0, a, np.zeros(N))
    return TravelingWave(eps, u, v, _residual_norm(u, v), "taylor")


def _galerkin(a: np.ndarray, v: float):
    """Sin-mode residuals r_1..r_N and the Jacobian in (a_2..a_N, v)."""
    N = len(a)
    u = TrigField(0.0, a, np.zeros(N))
    R = wave_residual(u, v)
    r = R.sin[:N].copy()
    m = np.arange(1, N + 1)
    A = np.zeros(2 * N + 1)
    A[1:N + 1] = a
    j = np.arange(2, N + 1)
    J = np.zeros((N, N))
    J[:, :N - 1] = -0.5 * m[:, None] * (A[np.abs(m[:, None] - j[None, :])] + A[m[:, None] + j[None, :]])
    J[j - 1, np.arange(N - 1)] += 1.0 + v * j
    J[:, N - 1] = m * a
    return r, J


def newton_refine(guess: TravelingWave | None, eps: float, N: int, tol: float = 1e-12,
                  max_iter: int = 25) -> TravelingWave:
    """Solve the truncated wave equation with ``cos_coef[1] = eps``.

    Unknowns are the cosine coefficients 2..N and the speed; equations are
    the N sine-mode residuals.  Convergence is declared when the full
    residual (all ``2N`` modes) drops to ``tol`` in L².
    """
    if guess is None:
        a = np.zeros(N)
        v = -1.0 - eps ** 2 / 4
    else:
        a = guess.u.truncate(N).cos.copy()
        v = guess.v
    a[0] = eps
    history = []
    for it in range(max_iter + 1):
        u = TrigField(0.0, a, np.zeros(N))
        res = _residual_norm(u, v)
        history.append(res)
        if res <= tol:
            return TravelingWave(eps, u, float(v), res, "newton", it)
        if it == max_iter or not np.isfinite(res):
            break
        if it >= 4 and res > 0.5 * history[-2] and res > 1e3 * tol:
            # stalled well above tol; no quadratic convergence left
            if len(history) > 6 and min(history[-3:]) >= 0.9 * min(history[:-3]):
                break
        r, J = _galerkin(a, v)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        a[1:] += step[:N - 1]
        v += step[N - 1]
    raise NewtonDivergence(eps, history)


def wave_tangent(wave: TravelingWave):
    """``(∂_eps u, ∂_eps v)`` of the truncated branch, from the Galerkin Jacobian.

    Differentiating the N sin-mode equations in the pinned coefficient
    ``a_1 = eps`` gives one linear solve with the Newton matrix.
    """
    a = wave.u.cos.copy()
    N = len(a)
    r, J = _galerkin(a, wave.v)
    m = np.arange(1, N + 1)
    A = np.zeros(2 * N + 2)
    A[1:N + 1] = a
    col = -0.5 * m * (A[np.abs(m - 1)] + A[m + 1])
    col[0] += 1.0 + wave.v
    x = np.linalg.solve(J, -col)
    du = np.zeros(N)
    du[0] = 1.0
    du[1:] = x[:N - 1]
    return TrigField(0.0, du, np.zeros(N)), float(x[N - 1])


@dataclass
class ContinuationResult:
    waves: list = field(default_factory=list)
    last_eps: float = 0.0
    stop_reason: str = "eps_max"
    failure: NewtonDivergence | None = None


def continuation(eps_max: float, d_eps: float, N: int, tol: float = 1e-10,
                 max_iter: int = 25) -> ContinuationResult:
    """March ``eps`` from 0 in steps ``d_eps``, seeding Newton with the previous wave."""
    if not 0 < d_eps <= 0.02:
        raise ValueError("d_eps must lie in (0, 0.02]")
    nsteps = int(math.floor(eps_max / d_eps + 1e-9))
    out = ContinuationResult()
    prev = newton_refine(None, 0.0, N, tol)
    for i in range(1, nsteps + 1):
        eps = i * d_eps
        try:
            w = newton_refine(prev, eps, N, tol, max_iter)
        except NewtonDivergence as exc:
            if i == 1:
                raise ValueError(f"continuation diverged at the first step: {exc}") from exc
            out.stop_reason = "divergence"
            out.failure = exc
            break
        out.waves.append(w)
        out.last_eps = eps
        prev = w
    return out
