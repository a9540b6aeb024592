"""Truncated trigonometric series on the torus R/2πZ.

A real 2π-periodic function is stored by its cosine/sine coefficients

    f(x) = mean + sum_{k=1}^{N} cos_coef[k-1] cos(kx) + sin_coef[k-1] sin(kx)

and converted to the complex-exponential half spectrum
``c[k] = (a_k - i b_k)/2`` (``c[0] = mean``) whenever a Fourier multiplier or a
grid transform is needed.  Grid samples are transient; the coefficients are
canonical.
"""
from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import fft as sfft


@dataclass(frozen=True)
class TrigField:
    """Immutable truncated cosine/sine series."""

    mean: float
    cos: np.ndarray
    sin: np.ndarray
    aliased: bool = field(default=False, compare=False)

    def __post_init__(self):
        c = np.array(self.cos, dtype=float)
        s = np.array(self.sin, dtype=float)
        if c.ndim != 1 or c.shape != s.shape:
            raise ValueError("cos and sin coefficient arrays must be 1-D and equal length")
        if not (np.isfinite(self.mean) and np.all(np.isfinite(c)) and np.all(np.isfinite(s))):
            raise ValueError("non-finite coefficient")
        c.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "cos", c)
        object.__setattr__(self, "sin", s)

    # construction ---------------------------------------------------------

    @classmethod
    def zeros(cls, N: int) -> "TrigField":
        return cls(0.0, np.zeros(N), np.zeros(N))

    @classmethod
    def from_modes(cls, N: int, mean: float = 0.0, cos: dict | None = None,
                   sin: dict | None = None) -> "TrigField":
        """Build from sparse ``{k: value}`` dictionaries."""
        a = np.zeros(N)
        b = np.zeros(N)
        for k, val in (cos or {}).items():
            a[k - 1] = val
        for k, val in (sin or {}).items():
            b[k - 1] = val
        return cls(mean, a, b)

    @classmethod
    def from_complex(cls, c: np.ndarray, N: int | None = None) -> "TrigField":
        """Inverse of :meth:`to_complex`; imaginary part of ``c[0]`` is dropped."""
        c = np.asarray(c)
        if N is None:
            N = len(c) - 1
        cc = np.zeros(N + 1, dtype=complex)
        n = min(N + 1, len(c))
        cc[:n] = c[:n]
        return cls(cc[0].real, 2.0 * cc[1:].real, -2.0 * cc[1:].imag)

    # views ------------------------------------------------------------------

    @property
    def N(self) -> int:
        return len(self.cos)

    @property
    def is_even(self) -> bool:
        return not np.any(self.sin)

    @property
    def is_odd(self) -> bool:
        return self.mean == 0.0 and not np.any(self.cos)

    @property
    def is_mean_zero(self) -> bool:
        return self.mean == 0.0

    def to_complex(self, N: int | None = None) -> np.ndarray:
        """Half spectrum ``c[0..N]`` with ``f = sum_k c_k e^{ikx}``, ``c_{-k} = conj(c_k)``."""
        N = self.N if N is None else N
        c = np.zeros(N + 1, dtype=complex)
        c[0] = self.mean
        n = min(N, self.N)
        c[1:n + 1] = 0.5 * (self.cos[:n] - 1j * self.sin[:n])
        return c

    def truncate(self, N: int) -> "TrigField":
        return TrigField.from_complex(self.to_complex(N), N)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.arange(1, self.N + 1)
        kx = np.multiply.outer(x, k)
        return self.mean + np.cos(kx) @ self.cos + np.sin(kx) @ self.sin

    # arithmetic -------------------------------------------------------------

    def _binary(self, other, op):
        N = max(self.N, other.N)
        a, b = self.truncate(N), other.truncate(N)
        return TrigField(op(a.mean, b.mean), op(a.cos, b.cos), op(a.sin, b.sin))

    def __add__(self, other: "TrigField") -> "TrigField":
        return self._binary(other, np.add)

    def __sub__(self, other: "TrigField") -> "TrigField":
        return self._binary(other, np.subtract)

    def __mul__(self, s: float) -> "TrigField":
        return TrigField(s * self.mean, s * self.cos, s * self.sin)

    __rmul__ = __mul__

    def __neg__(self) -> "TrigField":
        return -1.0 * self

    def shift(self, a: float) -> "TrigField":
        """Return ``x -> f(x + a)``."""
        k = np.arange(self.N + 1)
        return TrigField.from_complex(self.to_complex() * np.exp(1j * k * a), self.N)

    def rescale(self, n: int) -> "TrigField":
        """Return ``x -> f(n x)`` with truncation ``n N``."""
        c = np.zeros(n * self.N + 1, dtype=complex)
        c[::n] = self.to_complex()
        return TrigField.from_complex(c)

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {"mean": self.mean, "cos": self.cos.tolist(), "sin": self.sin.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "TrigField":
        return cls(d["mean"], np.asarray(d["cos"], float), np.asarray(d["sin"], float))

    @classmethod
    def from_json(cls, s: str) -> "TrigField":
        return cls.from_dict(json.loads(s))


# ---------------------------------------------------------------------------
# Fourier multipliers


@dataclass(frozen=True)
class MultiplierOp:
    """Fourier multiplier ``e^{ikx} -> symbol(k) e^{ikx}``.

    ``symbol`` must accept an integer array and return complex factors.
    """

    symbol: Callable[[np.ndarray], np.ndarray]
    name: str = "multiplier"

    def is_real_preserving(self, N: int) -> bool:
        k = np.arange(0, N + 1)
        plus = np.asarray(self.symbol(k), dtype=complex)
        minus = np.asarray(self.symbol(-k), dtype=complex)
        return bool(np.allclose(minus, np.conj(plus), rtol=1e-14, atol=0.0))


HILBERT = MultiplierOp(lambda k: -1j * np.sign(k), "H")
DERIV = MultiplierOp(lambda k: 1j * k, "d/dx")
ABS_DERIV = MultiplierOp(lambda k: np.abs(k).astype(complex), "Lambda")


def shifted_inverse(n: int) -> MultiplierOp:
    """Reduced resolvent of ``d/dx + H`` at the eigenvalue ``n i``.

    Acts on mode ``m`` by ``1 / (i (m - sgn m - n))`` and kills the resonant
    mode ``m = n + sgn n``.
    """
    s = int(np.sign(n))
    if s == 0:
        raise ValueError("n must be nonzero")

    def symbol(k):
        k = np.asarray(k)
        den = 1j * (k - np.sign(k) - n)
        out = np.zeros(k.shape, dtype=complex)
        ok = k != n + s
        out[ok] = 1.0 / den[ok]
        return out

    return MultiplierOp(symbol, f"S_{n}")


def apply_multiplier(op: MultiplierOp, f: TrigField) -> TrigField:
    """Apply a real-preserving multiplier; truncation is preserved."""
    if not op.is_real_preserving(f.N):
        raise ValueError(f"multiplier {op.name} does not preserve real fields")
    k = np.arange(f.N + 1)
    return TrigField.from_complex(f.to_complex() * op.symbol(k), f.N)


def hilbert(f: TrigField) -> TrigField:
    return apply_multiplier(HILBERT, f)


def deriv(f: TrigField, order: int = 1) -> TrigField:
    k = np.arange(f.N + 1)
    return TrigField.from_complex(f.to_complex() * (1j * k) ** order, f.N)


# ---------------------------------------------------------------------------
# grids and products


def product_grid_size(N: int) -> int:
    """Smallest fast FFT length that multiplies two N-mode fields without aliasing into |k| <= N."""
    return sfft.next_fast_len(3 * N + 1, real=True)


def to_grid(f: TrigField, M: int) -> np.ndarray:
    """Samples ``f(2πj/M)``, ``j = 0..M-1``; modes above ``M/2`` are dropped."""
    K = M // 2
    c = np.zeros(K + 1, dtype=complex)
    n = min(K, f.N)
    c[:n + 1] = f.to_complex(n)
    if M % 2 == 0 and n == K and K > 0:
        # Nyquist bin: irfft keeps only the real part, once
        c[K] = 2.0 * c[K].real
    return sfft.irfft(c * M, n=M)


def from_grid(samples, N: int | None = None) -> TrigField:
    """Discrete trigonometric interpolation of equispaced samples.

    With ``M`` samples the interpolant is exact for fields with ``N <= (M-1)//2``.
    Asking for more modes sets the ``aliased`` flag and warns.
    """
    samples = np.asarray(samples, dtype=float)
    M = len(samples)
    exact_N = (M - 1) // 2
    if N is None:
        N = exact_N
    c = sfft.rfft(samples) / M
    aliased = N > exact_N
    if aliased:
        warnings.warn(f"from_grid: {M} samples cannot resolve {N} modes", RuntimeWarning)
    out = np.zeros(N + 1, dtype=complex)
    n = min(N, len(c) - 1)
    out[:n + 1] = c[:n + 1]
    if M % 2 == 0 and n == M // 2:
        out[n] *= 0.5  # split Nyquist energy between ±M/2
    f = TrigField.from_complex(out, N)
    if aliased:
        f = TrigField(f.mean, f.cos, f.sin, aliased=True)
    return f


def product_complex(c1: np.ndarray, c2: np.ndarray, N: int) -> np.ndarray:
    """Half spectrum (modes 0..N) of the product of two half spectra, alias free."""
    K = max(len(c1), len(c2)) - 1
    M = sfft.next_fast_len(max(3 * K + 1, K + N + 1), real=True)
    g1 = sfft.irfft(_pad(c1, M // 2 + 1) * M, n=M)
    g2 = sfft.irfft(_pad(c2, M // 2 + 1) * M, n=M)
    c = sfft.rfft(g1 * g2) / M
    return _pad(c, N + 1)


def _pad(c: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=complex)
    m = min(n, len(c))
    out[:m] = c[:m]
    return out


def multiply(f: TrigField, g: TrigField, dealias: bool = False) -> TrigField:
    """Pointwise product truncated to ``max(f.N, g.N)`` modes.

    The product is formed on a grid of at least ``3N+1`` points, so every
    retained mode is exact.  With ``dealias`` the modes above ``floor(2N/3)``
    are zeroed as well (2/3 rule).
    """
    N = max(f.N, g.N)
    c = product_complex(f.to_complex(N), g.to_complex(N), N)
    if dealias:
        c[2 * N // 3 + 1:] = 0.0
    return TrigField.from_complex(c, N)


# ---------------------------------------------------------------------------
# norms

_NORM_RE = re.compile(r"^(L2_paper|L2|X|H|Hdot)(\d*)$")


def norm(f: TrigField, kind: str = "L2") -> float:
    """Norms on the torus.

    ``"L2"``        (∫_0^{2π} |f|²)^{1/2}
    ``"L2_paper"``  ((1/π) ∫ |f|²)^{1/2}, so ``‖sin nx‖ = 1``
    ``"Hs"``        (2π Σ_m (1+m²)^s |f̂_m|²)^{1/2}, e.g. ``"H4"``
    ``"Hdots"``     homogeneous version, weight ``|m|^{2s}``
    ``"X"``         (Σ_k (k-1)² a_k²)^{1/2}; only for even, mean-zero fields with no cos x mode
    """
    m = _NORM_RE.match(kind)
    if m is None:
        raise ValueError(f"unknown norm kind {kind!r}")
    name, order = m.group(1), m.group(2)
    k = np.arange(1, f.N + 1, dtype=float)
    amp2 = f.cos ** 2 + f.sin ** 2
    if name == "L2":
        return float(np.sqrt(2 * np.pi * f.mean ** 2 + np.pi * amp2.sum()))
    if name == "L2_paper":
        return float(np.sqrt(2 * f.mean ** 2 + amp2.sum()))
    if name == "X":
        if not (f.is_even and f.is_mean_zero and (f.N == 0 or f.cos[0] == 0.0)):
            raise ValueError("X norm needs an even, mean-zero field orthogonal to cos x")
        return float(np.sqrt(np.sum((k - 1) ** 2 * f.cos ** 2)))
    s = int(order) if order else 0
    if name == "H":
        return float(np.sqrt(2 * np.pi * f.mean ** 2 + np.pi * np.sum((1 + k ** 2) ** s * amp2)))
    return float(np.sqrt(np.pi * np.sum(k ** (2 * s) * amp2)))
