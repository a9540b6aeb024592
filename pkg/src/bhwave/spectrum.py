"""Spectrum of the linearization ``L g = -v g' + H g + (u g)'`` about a wave.

The operator is truncated to the exponentials ``e^{imx}``, ``1 <= |m| <= N``,
and diagonalized densely.  Eigenvalue ``lam[n]`` continues ``i n`` from
``eps = 0``, where it sits on the mode ``m = n + sgn n``; the modes
``m = ±1`` carry the double zero eigenvalue (translation and the branch
direction).
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .spectral import TrigField, deriv, norm, to_grid
from .wave import TravelingWave, WaveTaylor, newton_refine, taylor_table

KATO_MAX_ORDER = 6
CLOSED_FORM = (Fraction(-1, 4), Fraction(-11, 32), Fraction(-527, 768))
CLOSED_FORM_N1_EPS6 = Fraction(-529, 384)
WAVE_RESIDUAL_MAX = 1e-8


def _sgn(n: int) -> int:
    return (n > 0) - (n < 0)


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix of ``L_eps`` on ``e^{imx}``; ``modes[i]`` is the frequency of row/column ``i``."""

    entries: np.ndarray
    modes: np.ndarray
    eps: float

    @property
    def N(self) -> int:
        return int(self.modes.max())

    def index(self, m: int) -> int:
        return int(m + self.N if m < 0 else m + self.N - 1)

    def vector(self, f: TrigField) -> np.ndarray:
        """Coefficients of a mean-zero real field on the basis (modes above N dropped)."""
        c = f.to_complex(self.N)
        return np.concatenate([np.conj(c[:0:-1]), c[1:]])

    def field(self, vec: np.ndarray) -> TrigField:
        """Real part of the field with coefficients ``vec``."""
        pos = vec[self.N:]
        neg = vec[:self.N][::-1]
        c = np.zeros(self.N + 1, dtype=complex)
        c[1:] = 0.5 * (pos + np.conj(neg))
        return TrigField.from_complex(c, self.N)

    def apply(self, f: TrigField) -> TrigField:
        return self.field(self.entries @ self.vector(f))


def assemble_L(wave: TravelingWave, N: int) -> OperatorMatrix:
    """Diagonal ``i(m - sgn m)`` (at ``v = -1``) plus the band from ``((u - v - 1) g)'``."""
    if wave.residual_norm >= WAVE_RESIDUAL_MAX:
        raise ValueError(f"wave residual {wave.residual_norm:.2e} too large")
    if N < 4 * wave.u.N:
        raise ValueError(f"N={N} must be at least 4x the wave truncation {wave.u.N}")
    c = wave.u.to_complex()
    uhat = np.concatenate([np.conj(c[:0:-1]), c])
    modes = np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)]).astype(np.int64)
    A = _kernels.assemble_L(modes, uhat, float(wave.v))
    return OperatorMatrix(A, modes, wave.eps)


def c_eps(wave: TravelingWave, points: int | None = None) -> float:
    """``2π / ∫ dy / (u - v)`` by the trapezoid rule on at least ``8N`` points."""
    M = max(points or 0, 8 * max(wave.u.N, 1), 64)
    w = to_grid(wave.u, M) - wave.v
    if np.min(w) <= 0:
        raise ValueError("u - v changes sign; wave outside the regime")
    return float(1.0 / np.mean(1.0 / w))


# ---------------------------------------------------------------------------
# eigenvalues


def target(n: int, c: float) -> complex:
    """Leading-order location ``i((n + s) c - s)`` of ``lam[n]``."""
    s = _sgn(n)
    return 1j * ((n + s) * c - s)


@dataclass
class EigenPairSet:
    eps: float
    c_eps: float
    lam: dict                    # n -> complex
    vectors: dict                # n -> eigenvector on the matrix basis
    match_quality: dict          # n -> |lam[n] - target(n)|
    kernel: tuple                # the two leftover near-zero eigenvalues
    ambiguous: list = field(default_factory=list)

    def indices(self) -> list:
        return sorted(self.lam, key=lambda n: (abs(n), n))


def match_order(M: int):
    for k in range(1, M + 1):
        yield k
        yield -k


def eigen_spectrum(matrix: OperatorMatrix, wave: TravelingWave, M: int,
                   vectors: bool = False) -> EigenPairSet:
    """Dense eigensolve and greedy nearest-target labelling, smallest ``|n|`` first."""
    if not 1 <= M <= matrix.N // 2:
        raise ValueError("need 1 <= M <= N/2")
    if vectors:
        vals, vecs = np.linalg.eig(matrix.entries)
    else:
        vals, vecs = np.linalg.eigvals(matrix.entries), None
    c = c_eps(wave)
    free = np.ones(len(vals), dtype=bool)
    lam, vec, quality, ambiguous = {}, {}, {}, []
    for n in match_order(M):
        t = target(n, c)
        d = np.where(free, np.abs(vals - t), np.inf)
        j = int(np.argmin(d))
        if np.count_nonzero(d < d[j] + 1e-6) > 1:
            ambiguous.append(n)
        free[j] = False
        lam[n] = complex(vals[j])
        quality[n] = float(d[j])
        if vecs is not None:
            vec[n] = vecs[:, j]
    rest = np.nonzero(free)[0]
    rest = rest[np.argsort(np.abs(vals[rest]))[:2]]
    kernel = tuple(complex(z) for z in sorted(vals[rest], key=lambda z: (z.imag, z.real)))
    return EigenPairSet(matrix.eps, c, lam, vec, quality, kernel, ambiguous)


# ---------------------------------------------------------------------------
# small-eps expansion


def lambda_taylor_closed(n: int, eps: float) -> complex:
    """``i n`` plus the ``eps^2, eps^4, eps^6`` terms of ``lam[n]``."""
    if n == 0:
        raise ValueError("n must be nonzero")
    s = _sgn(n)
    c2, c4, c6 = (float(x) for x in CLOSED_FORM)
    if abs(n) == 1:
        c6 = float(CLOSED_FORM_N1_EPS6) / 2
    e2 = eps * eps
    return 1j * (n + (n + s) * e2 * (c2 + e2 * (c4 + e2 * c6)))


def _compositions(k: int):
    """All tuples of positive integers summing to ``k``."""
    for cuts in itertools.product((0, 1), repeat=k - 1):
        parts, run = [], 1
        for cut in cuts:
            if cut:
                parts.append(run)
                run = 1
            else:
                run += 1
        parts.append(run)
        yield tuple(parts)


def _representatives(p: int):
    """Tuples of ``p`` nonnegative integers summing to ``p-1`` that are their own smallest rotation."""
    for h in itertools.product(range(p), repeat=p):
        if sum(h) == p - 1 and all(h <= h[r:] + h[:r] for r in range(1, p)):
            yield h


def _perturbation_profiles(table: WaveTaylor, k: int):
    """Real exponential coefficients of ``u_v - v_v`` for ``v = 1..k`` as ``{j: Fraction}``."""
    out = {}
    for v in range(1, k + 1):
        w = {0: -Fraction(table.v[v])}
        for j in range(1, v + 1):
            if table.u[v][j]:
                w[j] = w[-j] = Fraction(table.u[v][j]) / 2
        out[v] = {j: x for j, x in w.items() if x}
    return out


def kato_coefficient(n: int, k: int, table: WaveTaylor | None = None) -> complex:
    """Coefficient of ``eps^k`` in ``lam[n]`` from the reduced Kato sum, in exact arithmetic.

    Each term applies ``L^{(v_p)} S^{(h_p)} ... L^{(v_1)}`` to ``e^{i(n+s)x}``
    and reads off mode ``n + s``.  Every ``L`` contributes a factor ``i`` and
    every ``S`` a factor ``1/i``; there is one more ``L`` than ``S``, so the
    chain is carried with real rationals and multiplied by ``i`` at the end.
    Returns a complex number; :func:`kato_coefficient_exact` gives the rational.
    """
    return 1j * float(kato_coefficient_exact(n, k, table))


def kato_coefficient_exact(n: int, k: int, table: WaveTaylor | None = None) -> Fraction:
    """Imaginary part of :func:`kato_coefficient` as a Fraction."""
    if n == 0:
        raise ValueError("n must be nonzero")
    if not 1 <= k <= KATO_MAX_ORDER:
        raise ValueError(f"k must lie in 1..{KATO_MAX_ORDER}")
    if table is None or not table.exact or table.nmax < k + 1:
        table = taylor_table(k + 1, exact=True)
    s = _sgn(n)
    home = n + s
    W = _perturbation_profiles(table, k)

    def apply_L(g, v):
        out = {}
        for m, gm in g.items():
            for j, wj in W[v].items():
                q = m + j
                if q:
                    out[q] = out.get(q, 0) + q * wj * gm
        return out

    def apply_S(g, h):
        if h == 0:
            return {home: -g[home]} if g.get(home) else {}
        out = {}
        for m, gm in g.items():
            if m != home:
                out[m] = gm / Fraction(m - _sgn(m) - n) ** h
        return out

    total = Fraction(0)
    for p in range(1, k + 1):
        reps = list(_representatives(p))
        sign = 1 if p % 2 == 1 else -1
        for vs in _compositions(k):
            if len(vs) != p:
                continue
            for hs in reps:
                g = {home: Fraction(1)}
                g = apply_L(g, vs[0])
                for j in range(1, p):
                    g = apply_S(g, hs[j])
                    if not g:
                        break
                    g = apply_L(g, vs[j])
                total += sign * g.get(home, 0)
    return total


# ---------------------------------------------------------------------------
# remainder, non-resonance, kernel


def remainder(eig: EigenPairSet) -> dict:
    """``|lam[n] - (n + s) c i + s i|`` for every labelled ``n``."""
    return {n: float(abs(lam - target(n, eig.c_eps))) for n, lam in eig.lam.items()}


def remainder_check(spectrum, other=None) -> dict:
    """Per-``n`` remainders, plus the two-point decay order in ``eps`` when ``other`` is given.

    Accepts :class:`EigenPairSet` or :class:`SpectrumReport` arguments.
    Returns ``{n: (residual, order)}`` with ``order`` None without ``other``.
    """
    r1 = _remainders_of(spectrum)
    if other is None:
        return {n: (r, None) for n, r in r1.items()}
    r2 = _remainders_of(other)
    ratio = math.log(abs(spectrum.eps) / abs(other.eps))
    out = {}
    for n, r in r1.items():
        order = None
        if n in r2 and r > 0 and r2[n] > 0:
            order = math.log(r / r2[n]) / ratio
        out[n] = (r, order)
    return out


def _remainders_of(obj) -> dict:
    if isinstance(obj, EigenPairSet):
        return remainder(obj)
    return dict(zip(obj.n, obj.remainder))


@dataclass(frozen=True)
class NonresResult:
    nonres_min: float
    witness: tuple               # (m, n, l)
    pair_cancellation: float     # max_n |lam[n] + lam[-n]|


def nonres_scan(eps: float, M: int, lam: dict | None = None) -> NonresResult:
    """Minimum of ``|lam[m] + lam[n] + lam[l]|`` over ``1 <= |m|, |n|, |l| <= M``.

    Uses the closed-form expansion unless a labelled eigenvalue map ``lam``
    is supplied.
    """
    if not 1 <= M <= 64:
        raise ValueError("M must lie in 1..64")
    idx = [n for n in match_order(M)]
    if lam is None:
        vals = np.array([lambda_taylor_closed(n, eps) for n in idx])
    else:
        vals = np.array([lam[n] for n in idx])
    best, a, b, c = _kernels.triple_min(vals)
    pair = max(abs(vals[2 * i] + vals[2 * i + 1]) for i in range(M))
    return NonresResult(float(best), (idx[a], idx[b], idx[c]), float(pair))


def wave_eps_derivative(wave: TravelingWave, h: float = 1e-4):
    """``(∂_eps u, ∂_eps v)`` by the fourth-order centered difference on Newton waves."""
    N = wave.u.N
    ws = {j: newton_refine(wave, wave.eps + j * h, N, tol=1e-13) for j in (-2, -1, 1, 2)}

    def d(get):
        return (8 * (get(ws[1]) - get(ws[-1])) - (get(ws[2]) - get(ws[-2]))) / (12 * h)

    du = d(lambda w: w.u.cos)
    dv = float(d(lambda w: w.v))
    return TrigField(0.0, du, np.zeros(N)), dv


def kernel_check(wave: TravelingWave, matrix: OperatorMatrix, h: float = 1e-4):
    """``(‖L u'‖, ‖L ∂u - (∂v) u'‖)`` in L²."""
    du_x = deriv(wave.u)
    d1 = norm(matrix.apply(du_x), "L2")
    if wave.eps == 0 and not np.any(wave.u.cos):
        # at the bifurcation point u' = 0 and ∂u = cos x, ∂v = 0
        du, dv = TrigField.from_modes(wave.u.N, cos={1: 1.0}), 0.0
    else:
        du, dv = wave_eps_derivative(wave, h)
    d2 = norm(matrix.apply(du) - _pad_to(du_x * dv, matrix.N), "L2")
    return d1, d2


def _pad_to(f: TrigField, N: int) -> TrigField:
    return TrigField.from_complex(f.to_complex(N), N)


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class SpectrumReport:
    eps: float
    N: int
    c_eps: float
    n: list
    lam: list
    taylor_pred: list
    remainder: list
    nonres_min: float
    nonres_witness: tuple
    kernel_defects: tuple
    kernel_pair: tuple
    ambiguous: list

    def to_dict(self) -> dict:
        return {"eps": self.eps, "N": self.N, "c_eps": self.c_eps,
                "spectrum": [{"n": n, "re": z.real, "im": z.imag,
                              "taylor_pred_im": t.imag, "remainder": r}
                             for n, z, t, r in zip(self.n, self.lam, self.taylor_pred,
                                                   self.remainder)],
                "nonres_min": self.nonres_min, "nonres_witness": list(self.nonres_witness),
                "kernel_defects": list(self.kernel_defects),
                "kernel_pair": [[z.real, z.imag] for z in self.kernel_pair],
                "ambiguous": list(self.ambiguous)}

    def csv_rows(self) -> list:
        return [[n, z.real, z.imag, t.imag, r]
                for n, z, t, r in zip(self.n, self.lam, self.taylor_pred, self.remainder)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "re_lambda", "im_lambda", "taylor_pred", "remainder"])
        w.writerows(self.csv_rows())
        return buf.getvalue()


def spectrum_report(eps: float, N: int, M: int | None = None, scan_M: int = 32,
                    wave: TravelingWave | None = None, kernel: bool = True) -> SpectrumReport:
    """Wave at truncation ``N/4``, matrix at ``N``, eigenvalues for ``|n| <= M`` (default ``N/4``)."""
    if wave is None:
        wave = newton_refine(None, eps, max(N // 4, 4), tol=1e-13)
    M = M or N // 4
    mat = assemble_L(wave, N)
    eig = eigen_spectrum(mat, wave, M)
    idx = eig.indices()
    rem = remainder(eig)
    scan = nonres_scan(eps, scan_M)
    defects = kernel_check(wave, mat) if kernel else (math.nan, math.nan)
    return SpectrumReport(eps, N, eig.c_eps, idx, [eig.lam[n] for n in idx],
                          [lambda_taylor_closed(n, eps) for n in idx], [rem[n] for n in idx],
                          scan.nonres_min, scan.witness, tuple(float(d) for d in defects),
                          eig.kernel, eig.ambiguous)
