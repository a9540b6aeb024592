"""Numerical checks of the amplitude bound for the wave branch.

The three operator bounds are computed exactly on truncated cosine bases
(largest singular value of the coefficient matrix), the bilinear constant
``C_n`` by direct summation, and the critical amplitude from the implicit
solution of the comparison ODE.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect

from . import _kernels

SQRT17 = math.sqrt(17.0)
B_PAPER = math.sqrt(math.pi ** 2 / 3 + 869 / 144)
C4_PAPER = 2 * math.pi ** 2 / 3 + 869 / 72
BOUND_SLACK = 1e-10


@dataclass(frozen=True)
class BoundReport:
    name: str
    truncation: int
    computed_value: float
    paper_bound: float
    satisfied: bool
    margin: float

    @classmethod
    def make(cls, name, truncation, value, bound):
        return cls(name, int(truncation), float(value), float(bound),
                   bool(value <= bound + BOUND_SLACK), float(bound - value))

    def to_dict(self) -> dict:
        return asdict(self)


def _x_unit_columns(N: int) -> np.ndarray:
    """Frequencies ``n = 2..N`` of the basis ``cos(nx)/(n-1)`` (unit X-norm)."""
    if N < 2:
        raise ValueError("N must be >= 2")
    return np.arange(2, N + 1)


def cos_product_deriv_matrix(N: int, shift: int) -> np.ndarray:
    """Matrix of ``f -> -(f cos(shift x))'`` from X-unit cosines to sine modes 1..N+shift.

    Sine coefficients are returned in the 1/π-normalized L² where
    ``‖sin mx‖ = 1``, so the spectral norm is the operator norm X -> L².
    """
    n = _x_unit_columns(N)
    M = np.zeros((N + shift, len(n)))
    col = np.arange(len(n))
    M[n + shift - 1, col] += 0.5 * (n + shift) / (n - 1)
    low = np.abs(n - shift)
    keep = low > 0
    M[low[keep] - 1, col[keep]] += 0.5 * low[keep] / (n[keep] - 1)
    return M


def op_norm_f_sinx(N: int) -> BoundReport:
    """Largest singular value of ``f -> f sin x - f' cos x`` on X-unit cosines 2..N."""
    if N < 8:
        raise ValueError("N must be >= 8")
    s = np.linalg.norm(cos_product_deriv_matrix(N, 1), 2)
    return BoundReport.make("f sin x - f' cos x", N, s, math.sqrt(3.0))


def op_norm_f_sin2x(N: int) -> BoundReport:
    """Same for ``f -> 2 f sin 2x - f' cos 2x``; bound ``sqrt(17)/2``."""
    if N < 8:
        raise ValueError("N must be >= 8")
    s = np.linalg.norm(cos_product_deriv_matrix(N, 2), 2)
    return BoundReport.make("2 f sin 2x - f' cos 2x", N, s, 0.5 * SQRT17)


def bilinear_matrix(g: np.ndarray) -> np.ndarray:
    """Matrix of ``f -> (f g)'`` from X-unit cosines 2..N to sine modes 1..2N.

    ``g`` holds the cosine coefficients of g for modes 1..N (``g[0]`` must be 0).
    """
    N = len(g)
    n = _x_unit_columns(N)
    j = np.nonzero(g)[0] + 1
    M = np.zeros((2 * N, len(n)))
    if len(j) == 0:
        return M
    nn, jj = np.meshgrid(n, j, indexing="ij")
    col = np.broadcast_to(np.arange(len(n))[:, None], nn.shape)
    w = -0.5 * g[jj - 1] / (nn - 1)
    np.add.at(M, (nn + jj - 1, col), w * (nn + jj))
    d = np.abs(nn - jj)
    keep = d > 0
    np.add.at(M, (d[keep] - 1, col[keep]), (w * d)[keep])
    return M


def _x_unit_to_cos(alpha: np.ndarray) -> np.ndarray:
    N = len(alpha) + 1
    g = np.zeros(N)
    g[1:] = alpha / np.arange(1, N)
    return g


def bilinear_value(f_alpha: np.ndarray, g_alpha: np.ndarray) -> float:
    """``‖(fg)'‖`` in the 1/π-normalized L² for X-unit coordinates of f and g."""
    return float(np.linalg.norm(bilinear_matrix(_x_unit_to_cos(g_alpha)) @ f_alpha))


def bilinear_probe(N: int, trials: int = 8, seed: int = 0, sweeps: int = 50) -> BoundReport:
    """Largest ``‖(fg)'‖`` found for X-unit f, g by alternating singular-vector ascent."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        g = rng.standard_normal(N - 1)
        g /= np.linalg.norm(g)
        val = 0.0
        for _ in range(sweeps):
            _, s, vt = np.linalg.svd(bilinear_matrix(_x_unit_to_cos(g)), full_matrices=False)
            f = vt[0]
            if s[0] <= val * (1 + 1e-13):
                val = max(val, s[0])
                break
            val = s[0]
            g = f  # (fg)' is symmetric in f and g
        best = max(best, val)
    return BoundReport.make("(f g)'", N, best, B_PAPER)


# ---------------------------------------------------------------------------
# C_n = D_n + 2 E_n


def cn_constant(n: int, K: int = 10 ** 6) -> float:
    """``C_n = Σ_{|m|>=2, |n-m|>=2} n² / ((|m|-1)² (|n-m|-1)²)``.

    The finite part ``D_n`` is summed exactly; ``E_n`` is summed to ``K``
    terms plus the midpoint-integral estimate of its tail (error < 1e-18 at
    the default ``K``).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tail = n ** 2 / (3.0 * (K + 0.5) ** 3)
    return _kernels.d_sum(n) + 2.0 * (_kernels.e_partial(n, K) + tail)


def d_constant(n: int) -> float:
    return float(_kernels.d_sum(n))


def cn_table(n_max: int, K: int = 10 ** 6) -> np.ndarray:
    """``C_n`` for ``n = 1..n_max`` (index 0 unused and NaN)."""
    out = np.full(n_max + 1, np.nan)
    for n in range(1, n_max + 1):
        out[n] = cn_constant(n, K)
    return out


# ---------------------------------------------------------------------------
# comparison ODE for the size of the correction along the branch


def _integral_sqrt(x):
    # ∫_0^x sqrt(10 + 4 t²) dt
    return x * np.sqrt(x ** 2 + 2.5) + 2.5 * np.arcsinh(np.sqrt(0.4) * x)


def quadratic_coefficients(x, B: float = B_PAPER):
    """``(a, b, c)`` of the implicit relation ``a y² + b y + c = 0``."""
    x = np.asarray(x, dtype=float)
    return 2 * B * x ** 2 + 4 * x, 8 * x + SQRT17 * x ** 2 - 4, _integral_sqrt(x)


def root_condition(x, B: float = B_PAPER):
    """``R(x) = b + 2 sqrt(a c)``; a non-negative root y exists iff ``R(x) <= 0``."""
    a, b, c = quadratic_coefficients(x, B)
    return b + 2 * np.sqrt(a * c)


def implicit_y(x, B: float = B_PAPER):
    """Smaller non-negative root of the implicit relation (NaN past the critical x)."""
    a, b, c = quadratic_coefficients(x, B)
    disc = b * b - 4 * a * c
    with np.errstate(invalid="ignore"):
        return np.where(disc >= 0, 2 * c / (-b + np.sqrt(np.maximum(disc, 0))), np.nan)


def ode_numerator(x, y, B: float = B_PAPER):
    return np.sqrt(10 + 4 * x ** 2) + (8 + 2 * SQRT17 * x) * y + 4 * B * x * y ** 2 + 4 * y ** 2


def ode_denominator(x, y, B: float = B_PAPER):
    return 4 - 8 * x - 8 * x * y - SQRT17 * x ** 2 - 4 * B * x ** 2 * y


def integrate_comparison_ode(x_end: float, B: float = B_PAPER, rtol=1e-12, atol=1e-14):
    """``y' = numerator/denominator``, ``y(0) = 0``, integrated to ``x_end``."""
    return solve_ivp(lambda x, y: ode_numerator(x, y, B) / ode_denominator(x, y, B),
                     (0.0, x_end), [0.0], method="DOP853", rtol=rtol, atol=atol,
                     dense_output=True)


def ode_blowup_x(B: float = B_PAPER, s_max: float = 5.0) -> float:
    """Abscissa where the ODE denominator vanishes along the solution curve.

    The curve is followed in arclength, ``(x, y)' ∝ (denominator, numerator)``,
    which stays regular where ``dy/dx`` blows up.
    """
    def rhs(s, z):
        x, y = z
        dx, dy = ode_denominator(x, y, B), ode_numerator(x, y, B)
        h = math.hypot(dx, dy)
        return [dx / h, dy / h]

    def hit(s, z):
        return ode_denominator(z[0], z[1], B)

    hit.terminal = True
    hit.direction = -1
    sol = solve_ivp(rhs, (0.0, s_max), [0.0, 0.0], method="DOP853", rtol=1e-12,
                    atol=1e-14, events=hit)
    if not len(sol.t_events[0]):
        raise RuntimeError("denominator never vanished along the ODE curve")
    return float(sol.y_events[0][0][0])


@dataclass(frozen=True)
class ImplicitCurve:
    """``a(x) y² + b(x) y + c(x) = 0`` with the bilinear constant ``B``."""

    B: float = B_PAPER

    def coefficients(self, x):
        return quadratic_coefficients(x, self.B)

    def R(self, x):
        return root_condition(x, self.B)

    def y(self, x):
        return implicit_y(x, self.B)

    def xstar(self) -> float:
        return find_xstar(self.B)


def find_xstar(B: float = B_PAPER, bracket=(0.1, 0.4), xtol: float = 1e-8) -> float:
    """Largest amplitude for which the implicit relation keeps a real root."""
    lo, hi = bracket
    if not root_condition(lo, B) < 0 < root_condition(hi, B):
        raise RuntimeError("no sign change of R(x) on the bracket")
    return float(bisect(lambda x: root_condition(x, B), lo, hi, xtol=xtol))
