"""Time integration of ``f_t = H f + f f_x`` and the modulated-wave frame.

The solver works on the half spectrum ``c[0..N]`` (``f = Σ c_k e^{ikx}``):
the Hilbert and transport terms are diagonal, the quadratic term is formed
exactly on a padded grid and then truncated by the 2/3 rule.  Time stepping
is classical RK4.

The frame decomposition writes ``f(x) = u_eps(x + a) + g(x + a)`` with ``g``
annihilated by the two dual functionals of the generalized kernel of the
linearization, spanned by ``phi+ = ∂_eps u`` and ``phi- = -u'/eps``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .spectral import TrigField, deriv, norm
from .spectrum import assemble_L
from .wave import NewtonDivergence, TravelingWave, newton_refine, wave_tangent

CFL = 0.5
TAIL_LIMIT = 1e-3


def cfl_limit(N: int, fmax: float) -> float:
    return CFL / (N * (fmax + 1.0))


@dataclass(frozen=True)
class SimConfig:
    N: int = 64
    dt: float = 1e-3
    dealias: bool = True
    frame: str = "lab"              # "lab" or "comoving"
    v: float = 0.0                  # frame speed when comoving
    record_every: int = 10

    def __post_init__(self):
        if self.frame not in ("lab", "comoving"):
            raise ValueError("frame must be 'lab' or 'comoving'")
        if self.N < 4 or self.dt <= 0 or self.record_every < 1:
            raise ValueError("need N >= 4, dt > 0, record_every >= 1")

    @property
    def speed(self) -> float:
        return self.v if self.frame == "comoving" else 0.0

    def check_cfl(self, f: TrigField):
        fmax = float(np.max(np.abs(_grid(f.to_complex(self.N), 4 * self.N))))
        lim = cfl_limit(self.N, fmax)
        if self.dt > lim * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} exceeds the CFL limit {lim:.3e}")


@dataclass(frozen=True)
class SimState:
    t: float
    f: TrigField
    diagnostics: dict = field(default_factory=dict)


class SimulationBlowup(RuntimeError):
    def __init__(self, t, report):
        self.t = t
        self.report = report
        super().__init__(f"non-finite coefficients at t={t}")


# ---------------------------------------------------------------------------
# semi-discrete right-hand side


def _grid(c, M):
    return sfft.irfft(_fit(c, M // 2 + 1) * M, n=M)


def _fit(c, n):
    out = np.zeros(n, dtype=complex)
    m = min(n, len(c))
    out[:m] = c[:m]
    return out


class _Stepper:
    """Precomputed symbols and grid for one (N, speed, dealias) triple."""

    def __init__(self, N: int, speed: float = 0.0, dealias: bool = True):
        self.N = N
        k = np.arange(N + 1)
        self.ik = 1j * k
        self.lin = -1j * np.sign(k) - speed * self.ik
        self.M = sfft.next_fast_len(3 * N + 1, real=True)
        self.keep = np.ones(N + 1)
        if dealias:
            self.keep[2 * N // 3 + 1:] = 0.0
        self.keep[0] = 0.0

    def rhs(self, c):
        M = self.M
        g = sfft.irfft(_fit(c, M // 2 + 1) * M, n=M)
        sq = sfft.rfft(g * g)[:self.N + 1] / M
        out = self.lin * c + 0.5 * self.ik * sq * self.keep
        out[0] = 0.0
        return out

    def step(self, c, dt):
        k1 = self.rhs(c)
        k2 = self.rhs(c + 0.5 * dt * k1)
        k3 = self.rhs(c + 0.5 * dt * k2)
        k4 = self.rhs(c + dt * k3)
        return c + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def rhs(f: TrigField, v: float = 0.0, dealias: bool = True) -> TrigField:
    """``H f + f f_x - v f_x`` with a dealiased quadratic term and zero mean."""
    N = max(f.N, 1)
    return TrigField.from_complex(_Stepper(N, v, dealias).rhs(f.to_complex(N)), N)


def diagnostics(c, N: int) -> dict:
    k = np.arange(N + 1)
    e = np.abs(c) ** 2
    tot = e[1:].sum()
    tail = e[N // 3 + 1:].sum()
    fx = _grid(1j * k * c, 4 * N)
    return {"l2": float(np.sqrt(2 * np.pi * (e[0] + 2 * tot))),
            "mean": float(c[0].real),
            "tail_fraction": float(np.sqrt(tail / tot)) if tot > 0 else 0.0,
            "max_slope": float(np.max(np.abs(fx)))}


def step_rk4(state: SimState, config: SimConfig) -> SimState:
    """One RK4 step of size ``config.dt``."""
    config.check_cfl(state.f)
    st = _Stepper(config.N, config.speed, config.dealias)
    c = st.step(state.f.to_complex(config.N), config.dt)
    t = state.t + config.dt
    if not np.all(np.isfinite(c)):
        raise SimulationBlowup(t, {"t": t, "last": diagnostics(state.f.to_complex(config.N), config.N)})
    return SimState(t, TrigField.from_complex(c, config.N), diagnostics(c, config.N))


def simulate(f0: TrigField, config: SimConfig, t_end: float, callback=None):
    """Integrate to ``t_end`` (last step shortened).  Returns ``(final state, records)``.

    ``records`` holds ``(t, diagnostics)`` every ``record_every`` steps and at
    the end.  ``callback(t, c)`` may return True to stop early.
    """
    config.check_cfl(f0)
    N = config.N
    st = _Stepper(N, config.speed, config.dealias)
    c = f0.to_complex(N)
    c[0] = f0.mean
    nsteps = int(math.ceil(t_end / config.dt - 1e-9))
    t = 0.0
    records = [(0.0, diagnostics(c, N))]
    for i in range(1, nsteps + 1):
        dt = min(config.dt, t_end - t) if i == nsteps else config.dt
        c = st.step(c, dt)
        t = t_end if i == nsteps else i * config.dt
        if not np.all(np.isfinite(c)):
            raise SimulationBlowup(t, {"t": t, "records": records[-3:]})
        if i % config.record_every == 0 or i == nsteps:
            records.append((t, diagnostics(c, N)))
            if callback is not None and callback(t, c):
                break
    return SimState(t, TrigField.from_complex(c, N), records[-1][1]), records


# ---------------------------------------------------------------------------
# frame decomposition


class WaveProvider:
    """Newton waves on ``N`` modes, warm-started from the nearest previous amplitude."""

    def __init__(self, N: int, tol: float = 1e-13):
        self.N = N
        self.tol = tol
        self._cache: dict = {}

    def __call__(self, eps: float) -> TravelingWave:
        eps = float(eps)
        if eps in self._cache:
            return self._cache[eps]
        guess = None
        if self._cache:
            guess = self._cache[min(self._cache, key=lambda e: abs(e - eps))]
        w = newton_refine(guess, eps, self.N, self.tol)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[eps] = w
        return w


@dataclass(frozen=True)
class ZeroSpace:
    """Basis ``phi+, phi-`` of the generalized kernel and real dual functionals.

    ``duals`` is a 2 x 2N real matrix acting on ``[cos_1..cos_N, sin_1..sin_N]``
    with ``duals @ coef(phi+) = (1, 0)`` and ``duals @ coef(phi-) = (0, 1)``.
    """

    eps: float
    phi_plus: TrigField
    phi_minus: TrigField
    duals: np.ndarray

    def pair(self, g: TrigField) -> np.ndarray:
        N = self.duals.shape[1] // 2
        gg = g.truncate(N) if g.N != N else g
        return self.duals @ np.concatenate([gg.cos, gg.sin])


def zero_space(wave: TravelingWave, N_op: int | None = None) -> ZeroSpace:
    """Duals from the left invariant subspace of the truncated ``L_eps`` near 0.

    The operator is assembled on ``N_op`` modes (default: the wave's) with
    the wave truncated to ``N_op/4`` modes.
    """
    if wave.eps == 0:
        raise ValueError("the frame is singular at eps = 0")
    N = wave.u.N
    N_op = N_op or N
    w_op = TravelingWave(wave.eps, wave.u.truncate(max(N_op // 4, 1)), wave.v, 0.0, wave.source)
    mat = assemble_L(w_op, N_op)
    _, Z, k = sla.schur(mat.entries.conj().T, output="complex", sort=lambda z: abs(z) < 0.5)
    if k != 2:
        raise RuntimeError(f"expected a 2-dimensional zero space, found {k}")
    Wl = Z[:, :2]
    du, _ = wave_tangent(wave)
    phi_p = du
    phi_m = deriv(wave.u) * (-1.0 / wave.eps)
    V = np.column_stack([mat.vector(phi_p), mat.vector(phi_m)])
    D = np.linalg.solve(Wl.conj().T @ V, Wl.conj().T)   # D V = I
    Np = min(N_op, N)
    pos = D[:, N_op:N_op + Np]
    neg = D[:, N_op - 1::-1][:, :Np]
    duals = np.zeros((2, 2 * N))
    duals[:, :Np] = 0.5 * (pos + neg).real
    duals[:, N:N + Np] = 0.5 * (pos.imag - neg.imag)
    return ZeroSpace(wave.eps, phi_p, phi_m, duals)


@dataclass(frozen=True)
class FrameState:
    eps: float
    a: float
    g: TrigField
    fit_residual: float
    phi0_plus: TrigField
    phi0_minus: TrigField
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"eps": self.eps, "a": self.a, "fit_residual": self.fit_residual,
                "iterations": self.iterations, "g": self.g.to_dict()}


class FrameFail(RuntimeError):
    pass


def frame_fit(f: TrigField, eps_guess: float, a_guess: float, wave_provider=None,
              tol: float = 1e-12, max_iter: int = 30, N_op: int | None = None) -> FrameState:
    """Newton on ``F(eps, a) = duals(eps) · (f(· - a) - u_eps)`` in the two unknowns.

    Returns ``a`` reduced to ``[0, 2π)`` and ``g = f(· - a) - u_eps``.
    """
    N = f.N
    provider = wave_provider or WaveProvider(N)
    eps, a = float(eps_guess), float(a_guess)
    zs = None
    for it in range(max_iter + 1):
        try:
            w = provider(eps)
        except NewtonDivergence as exc:
            raise FrameFail(f"no wave at eps={eps}") from exc
        if zs is None or abs(zs.eps - eps) > 1e-8 * max(abs(eps), 1.0):
            zs = zero_space(w, N_op)
        fa = f.shift(-a)
        g = fa - w.u.truncate(N)
        F = zs.pair(g)
        res = float(np.max(np.abs(F)))
        if res <= tol and abs(zs.eps - eps) <= 1e-8 * max(abs(eps), 1.0):
            zs_final = zero_space(w, N_op) if zs.eps != eps else zs
            F = zs_final.pair(g)
            if np.max(np.abs(F)) <= max(tol, 1e-10):
                return FrameState(eps, _wrap(a), g, float(np.max(np.abs(F))),
                                  zs_final.phi_plus, zs_final.phi_minus, it)
            zs = zs_final
            continue
        if not np.isfinite(res) or it == max_iter:
            break
        J = np.column_stack([zs.pair(-deriv(fa)), zs.pair(-zs.phi_plus)])
        try:
            da, de = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        a += da
        eps += de
    raise FrameFail(f"frame fit did not converge in {max_iter} iterations")


# ---------------------------------------------------------------------------
# lifespan experiments


STOP_REASONS = ("doubling", "frame_fail", "resolution", "slope_blowup", "t_max")


@dataclass
class LifespanRecord:
    eps: float
    delta: float
    T_obs: float
    stop_reason: str
    samples: list                       # (t, ‖g‖_H4, eps(t), a(t), max |dual pairing|)
    crossings: dict = field(default_factory=dict)   # multiple of delta -> first time
    config: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)    # solver diagnostics at each sample

    def to_dict(self) -> dict:
        d = asdict(self)
        d["samples"] = [list(s) for s in self.samples]
        d["crossings"] = {str(k): v for k, v in self.crossings.items()}
        return d


def perturbation_profile(wave: TravelingWave, N: int, zs: ZeroSpace | None = None) -> TrigField:
    """``cos 2x + sin 3x`` with its zero-space components removed, unit H⁴ norm."""
    p = TrigField.from_modes(N, cos={2: 1.0}, sin={3: 1.0})
    zs = zs or zero_space(wave)
    y = zs.pair(p)
    p = p - zs.phi_plus.truncate(N) * y[0] - zs.phi_minus.truncate(N) * y[1]
    p = TrigField(0.0, p.cos, p.sin)
    return p * (1.0 / norm(p, "H4"))


def lifespan_run(eps: float, delta: float, config: SimConfig, t_max: float,
                 stop_multiple: float = 2.0, thresholds=(2.0, 4.0, 8.0),
                 wave_N: int | None = None) -> LifespanRecord:
    """Evolve ``u_eps + delta p`` and refit the frame every ``record_every`` steps.

    ``T_obs`` is the first sample time with ``‖g‖_H4 >= stop_multiple * delta``.
    """
    if delta > eps / 10 + 1e-15:
        raise ValueError("need delta <= eps/10")
    N = config.N
    provider = WaveProvider(wave_N or N)
    w0 = provider(eps)
    zs = zero_space(w0)
    f0 = w0.u.truncate(N)
    if delta > 0:
        f0 = f0 + perturbation_profile(w0, N, zs) * delta
    cfg = replace(config, frame="lab")
    rec = LifespanRecord(eps, delta, t_max, "t_max", [], {}, asdict(cfg))
    state = {"eps": eps, "a": 0.0, "t": 0.0}
    slope0 = diagnostics(f0.to_complex(N), N)["max_slope"]

    def observe(t, c):
        d = diagnostics(c, N)
        if d["tail_fraction"] > TAIL_LIMIT:
            rec.stop_reason, rec.T_obs = "resolution", t
            return True
        if d["max_slope"] > 10 * (slope0 + 1):
            rec.stop_reason, rec.T_obs = "slope_blowup", t
            return True
        f = TrigField.from_complex(c, N)
        # the phase drifts at the wave speed, a ≈ v t
        a_guess = state["a"] + provider(state["eps"]).v * (t - state["t"])
        try:
            fs = frame_fit(f, state["eps"], a_guess, provider)
        except FrameFail:
            rec.stop_reason, rec.T_obs = "frame_fail", t
            return True
        state["eps"], state["t"] = fs.eps, t
        # keep a continuous so warm starts stay close
        state["a"] = fs.a + 2 * np.pi * round((a_guess - fs.a) / (2 * np.pi))
        gn = norm(fs.g, "H4")
        rec.samples.append((float(t), gn, fs.eps, fs.a, fs.fit_residual))
        rec.diagnostics.append(d)
        for m in thresholds:
            if delta > 0 and gn >= m * delta and m not in rec.crossings:
                rec.crossings[m] = float(t)
        if delta > 0 and gn >= stop_multiple * delta:
            rec.stop_reason, rec.T_obs = "doubling", float(t)
            return True
        return False

    observe(0.0, f0.to_complex(N))
    try:
        simulate(f0, cfg, t_max, observe)
    except SimulationBlowup as exc:
        rec.stop_reason, rec.T_obs = "slope_blowup", exc.t
    return rec


def _run_one(args):
    eps, delta, config, t_max, kwargs = args
    return lifespan_run(eps, delta, config, t_max, **kwargs)


def worker_count(n_jobs: int) -> int:
    cap = int(os.environ.get("BHWAVE_THREADS", os.cpu_count() or 1))
    return max(1, min(cap, n_jobs))


@dataclass
class SweepResult:
    records: list
    slope_A: float | None = None          # d log T / d log(1/(eps delta))
    slope_A_se: float | None = None
    slope_B: float | None = None          # d log T / d log(eps/delta²)
    slope_B_se: float | None = None

    def table(self) -> list:
        return [(r.eps, r.delta, r.T_obs, r.stop_reason) for r in self.records]


def fit_slope(x, y):
    """Least-squares slope and its standard error (NaN error with two points)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = len(x)
    if n > 2:
        s2 = float(np.sum((y - A @ coef) ** 2)) / (n - 2)
        se = math.sqrt(s2 / np.sum((x - x.mean()) ** 2))
    else:
        se = math.nan
    return float(coef[0]), se


def delta_rule(name: str, c: float):
    if name == "A":
        return lambda eps: c * eps
    if name == "B":
        return lambda eps: c * eps ** 2
    raise ValueError("delta rule must be 'A' or 'B'")


def sweep_lifespan(eps_list, delta_fn, config: SimConfig, t_max, workers: int | None = None,
                   **kwargs) -> SweepResult:
    """Run ``lifespan_run`` for each eps (in a process pool) and fit the scaling slopes.

    ``t_max`` may be a number or a function of ``(eps, delta)``.  Only runs
    that stopped by doubling enter the fits.
    """
    eps_list = list(eps_list)
    if len(eps_list) < 3:
        raise ValueError("need at least 3 eps values")
    jobs = []
    for e in eps_list:
        d = delta_fn(e)
        tm = t_max(e, d) if callable(t_max) else t_max
        jobs.append((e, d, config, tm, kwargs))
    n = workers or worker_count(len(jobs))
    if n == 1:
        records = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(n) as ex:
            records = list(ex.map(_run_one, jobs))
    out = SweepResult(records)
    done = [r for r in records if r.stop_reason == "doubling"]
    if len(done) >= 2:
        logT = [math.log(r.T_obs) for r in done]
        out.slope_A, out.slope_A_se = fit_slope([math.log(1 / (r.eps * r.delta)) for r in done], logT)
        out.slope_B, out.slope_B_se = fit_slope([math.log(r.eps / r.delta ** 2) for r in done], logT)
    return out


def _wrap(a: float) -> float:
    a = a % (2 * np.pi)
    return 0.0 if a >= 2 * np.pi else a
