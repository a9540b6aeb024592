"""Command-line entry point: ``bhwave <subcommand> --out DIR [options]``.

Every artifact embeds the RunSpec (subcommand, parameters, output dir, seed):
as a ``runspec`` field in JSON, a leading ``# runspec {...}`` line in CSV and
a ``<desc>`` element in SVG.  Exit codes: 0 success, 1 invalid input,
2 numerical failure (a ``failure.json`` with diagnostics is written).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

EPS_LIMIT = 0.55
SUBCOMMANDS = ("wave", "constants", "spectrum", "simulate", "lifespan", "frame")

RUN_CSV_HEADER = ["t", "l2", "mean", "max_slope", "tail_fraction", "eps", "a", "g_h4"]
SWEEP_CSV_HEADER = ["eps", "delta", "T_obs", "stop_reason"]
CN_CSV_HEADER = ["n", "C_n"]


class ValidationError(Exception):
    pass


@dataclass
class RunSpec:
    subcommand: str
    parameters: dict = field(default_factory=dict)
    output_dir: str = "."
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# output helpers


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def write_json(path: str, payload: dict, spec: RunSpec):
    body = {"runspec": spec.to_dict(), **payload}
    _atomic_write(path, json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")


def csv_text(header, rows, spec: RunSpec) -> str:
    buf = io.StringIO()
    buf.write("# runspec " + spec.to_json() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def write_csv(path: str, header, rows, spec: RunSpec):
    _atomic_write(path, csv_text(header, rows, spec))


def read_csv(path: str):
    """``(runspec dict, header, rows as strings)`` of a CSV written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# runspec "):
            raise ValueError("missing runspec line")
        spec = json.loads(first[len("# runspec "):])
        rows = list(csv.reader(fh))
    return spec, rows[0], rows[1:]


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


# ---------------------------------------------------------------------------
# SVG


def render_svg(rows, plot: dict, spec: RunSpec | None = None) -> str | None:
    """Deterministic SVG line/scatter plot of ``rows`` (sequence of (x, y)).

    ``plot`` keys: ``title``, ``xlabel``, ``ylabel``, ``logx``, ``logy``,
    ``style`` ("line" or "scatter") and optional ``fit`` = (slope, intercept)
    drawn in transformed coordinates.  Returns None for an empty table.
    """
    pts = [(float(x), float(y)) for x, y in rows
           if math.isfinite(float(x)) and math.isfinite(float(y))]
    if plot.get("logx"):
        pts = [(math.log10(x), y) for x, y in pts if x > 0]
    if plot.get("logy"):
        pts = [(x, math.log10(y)) for x, y in pts if y > 0]
    if not pts:
        return None
    W, H, pad = 640, 420, 60
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def X(x):
        return pad + (x - x0) / (x1 - x0) * (W - 2 * pad)

    def Y(y):
        return H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">']
    if spec is not None:
        out.append(f"<desc>{_esc(spec.to_json())}</desc>")
    out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>')
    out.append(f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" '
               'fill="none" stroke="black"/>')
    if plot.get("title"):
        out.append(f'<text x="{W // 2}" y="30" text-anchor="middle" font-size="16">'
                   f'{_esc(plot["title"])}</text>')
    xl = ("log10 " if plot.get("logx") else "") + plot.get("xlabel", "x")
    yl = ("log10 " if plot.get("logy") else "") + plot.get("ylabel", "y")
    out.append(f'<text x="{W // 2}" y="{H - 15}" text-anchor="middle" font-size="13">{_esc(xl)}</text>')
    out.append(f'<text x="15" y="{H // 2}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 15 {H // 2})">{_esc(yl)}</text>')
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{X(v):.2f}" y="{H - pad + 16}" text-anchor="{anchor}" '
                   f'font-size="11">{v:.4g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{pad - 5}" y="{Y(v):.2f}" text-anchor="end" font-size="11">{v:.4g}</text>')
    if plot.get("style", "line") == "line" and len(pts) > 1:
        path = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="#1f4e99" stroke-width="1.5"/>')
    else:
        for x, y in pts:
            out.append(f'<circle cx="{X(x):.2f}" cy="{Y(y):.2f}" r="4" fill="#1f4e99"/>')
    fit = plot.get("fit")
    if fit is not None and all(math.isfinite(v) for v in fit):
        s, b = fit
        out.append(f'<line x1="{X(x0):.2f}" y1="{Y(s * x0 + b):.2f}" x2="{X(x1):.2f}" '
                   f'y2="{Y(s * x1 + b):.2f}" stroke="#b22222" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{W - pad}" y="{pad - 8}" text-anchor="end" font-size="12">'
                   f'slope {s:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path, rows, plot, spec) -> bool:
    text = render_svg(rows, plot, spec)
    if text is None:
        print(f"notice: empty table, {os.path.basename(path)} skipped", file=sys.stderr)
        return False
    _atomic_write(path, text)
    return True


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _eps_list(s: str):
    return [float(x) for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bhwave", description="Traveling waves and perturbations of the "
                                          "Burgers-Hilbert equation on the torus.")
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help="output directory (created if absent)")
        sp.add_argument("--config", help="plain key=value file; flags override it")
        sp.add_argument("--seed", type=int, default=0)

    w = sub.add_parser("wave", help="traveling wave by Newton, Taylor series or continuation")
    common(w)
    w.add_argument("--eps", type=float, default=0.1)
    w.add_argument("--modes", type=int, default=64)
    w.add_argument("--method", choices=("newton", "taylor", "continuation"), default="newton")
    w.add_argument("--order", type=int, default=30, help="Taylor order")
    w.add_argument("--d-eps", type=float, default=0.005, help="continuation step")
    w.add_argument("--tol", type=float, default=1e-12)

    c = sub.add_parser("constants", help="operator-norm bounds, C_n table and x*")
    common(c)
    c.add_argument("--all", action="store_true", help="run every check (the default)")
    c.add_argument("--modes", type=int, default=200)
    c.add_argument("--trials", type=int, default=8)
    c.add_argument("--n-max", type=int, default=500)

    s = sub.add_parser("spectrum", help="eigenvalues of the linearized operator")
    common(s)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--modes", type=int, default=256)
    s.add_argument("--M", type=int, default=None, help="report |n| <= M (default modes/4)")
    s.add_argument("--scan-M", type=int, default=32)

    m = sub.add_parser("simulate", help="evolve a wave plus perturbation")
    common(m)
    m.add_argument("--eps", type=float, default=0.1)
    m.add_argument("--delta", type=float, default=0.0)
    m.add_argument("--modes", type=int, default=64)
    m.add_argument("--dt", type=float, default=None, help="default: 0.8 x CFL limit")
    m.add_argument("--t-end", type=float, default=10.0)
    m.add_argument("--frame", choices=("lab", "comoving"), default="lab")
    m.add_argument("--record-every", type=int, default=50)
    m.add_argument("--no-fit", action="store_true", help="skip frame fits (eps, a, g_h4 empty)")

    ls = sub.add_parser("lifespan", help="doubling-time sweep over eps")
    common(ls)
    ls.add_argument("--eps", type=_eps_list, default=[0.16, 0.08, 0.04])
    ls.add_argument("--delta-rule", choices=("A", "B"), default="A")
    ls.add_argument("--delta-c", type=float, default=0.05)
    ls.add_argument("--modes", type=int, default=64)
    ls.add_argument("--t-max", type=float, default=None,
                    help="default: 40/(eps delta) per run")
    ls.add_argument("--sample-dt", type=float, default=1.0, help="time between frame fits")
    ls.add_argument("--workers", type=int, default=None)

    f = sub.add_parser("frame", help="frame fit of a perturbed, shifted wave")
    common(f)
    f.add_argument("--eps", type=float, default=0.1)
    f.add_argument("--a", type=float, default=0.3)
    f.add_argument("--perturb", type=float, default=0.0, help="H2 size of a random perturbation")
    f.add_argument("--modes", type=int, default=64)
    f.add_argument("--eps-guess", type=float, default=None)
    f.add_argument("--a-guess", type=float, default=None)
    return p


def load_config(path: str) -> dict:
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None:
        raise ValidationError("a subcommand is required: " + ", ".join(SUBCOMMANDS))
    if args.config:
        conf = load_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.subcommand]
        known = {a.dest: a for a in sub._actions}
        for k in conf:
            if k not in known or k in ("config", "help"):
                raise ValidationError(f"unknown config key {k!r}")
        # config values become defaults, then the command line is parsed again
        defaults = {}
        for k, raw in conf.items():
            act = known[k]
            if isinstance(act, argparse._StoreTrueAction):
                defaults[k] = raw.lower() in ("1", "true", "yes", "on")
            else:
                defaults[k] = act.type(raw) if act.type else raw
                if act.choices and defaults[k] not in act.choices:
                    raise ValidationError(f"config {k}={raw} not in {act.choices}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if not args.out:
        raise ValidationError("--out is required")
    eps = getattr(args, "eps", None)
    for e in (eps if isinstance(eps, list) else [eps] if eps is not None else []):
        if abs(e) > EPS_LIMIT:
            raise ValidationError(f"|eps| = {abs(e)} exceeds {EPS_LIMIT}")
    return args


def runspec_of(args) -> RunSpec:
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("subcommand", "out", "seed", "config")}
    return RunSpec(args.subcommand, params, args.out, args.seed)


# ---------------------------------------------------------------------------
# subcommands


def _path(spec, name):
    return os.path.join(spec.output_dir, name)


def cmd_wave(args, spec):
    from .wave import continuation, eval_taylor, newton_refine, taylor_table
    if args.modes < 2:
        raise ValidationError("--modes must be >= 2")
    payload = {}
    if args.method == "newton":
        w = newton_refine(None, args.eps, args.modes, args.tol)
    elif args.method == "taylor":
        table = taylor_table(args.order)
        w = eval_taylor(table, args.eps, args.modes)
        _atomic_write(_path(spec, "taylor_u.csv"), "# runspec " + spec.to_json() + "\n" + table.to_csv())
        _atomic_write(_path(spec, "taylor_v.csv"), "# runspec " + spec.to_json() + "\n" + table.v_csv())
    else:
        res = continuation(abs(args.eps), args.d_eps, args.modes, tol=max(args.tol, 1e-10))
        if not res.waves:
            raise RuntimeError("continuation produced no waves")
        w = res.waves[-1]
        payload["continuation"] = {"last_eps": res.last_eps, "stop_reason": res.stop_reason,
                                   "failure_history": res.failure.history if res.failure else None}
        write_csv(_path(spec, "branch.csv"), ["eps", "v", "residual"],
                  [(x.eps, x.v, x.residual_norm) for x in res.waves], spec)
    payload["wave"] = w.to_dict()
    write_json(_path(spec, "wave.json"), payload, spec)
    write_csv(_path(spec, "coefficients.csv"), ["k", "cos_coef"],
              [(k + 1, a) for k, a in enumerate(w.u.cos)], spec)
    return 0


def cmd_constants(args, spec):
    from . import bounds
    if args.modes < 8 or args.n_max < 4 or args.trials < 1:
        raise ValidationError("need --modes >= 8, --n-max >= 4, --trials >= 1")
    reports = [bounds.op_norm_f_sinx(args.modes), bounds.op_norm_f_sin2x(args.modes),
               bounds.bilinear_probe(args.modes, args.trials, args.seed)]
    table = bounds.cn_table(args.n_max)
    argmax = int(np.nanargmax(table))
    xstar = bounds.find_xstar()
    payload = {
        "bounds": [r.to_dict() for r in reports],
        "C_n": {"argmax": argmax, "max": float(table[argmax]),
                "C4": float(table[4]), "C4_paper": bounds.C4_PAPER,
                "C4_closed_form": 2 * math.pi ** 2 / 3 + 797 / 72},
        "xstar": {"bisection": xstar, "ode_blowup": bounds.ode_blowup_x(),
                  "B": bounds.B_PAPER},
    }
    write_json(_path(spec, "constants.json"), payload, spec)
    write_csv(_path(spec, "cn_table.csv"), CN_CSV_HEADER,
              [(n, table[n]) for n in range(1, args.n_max + 1)], spec)
    return 0


def cmd_spectrum(args, spec):
    from .spectrum import spectrum_report
    if args.modes < 16:
        raise ValidationError("--modes must be >= 16")
    rep = spectrum_report(args.eps, args.modes, args.M, args.scan_M)
    write_json(_path(spec, "spectrum.json"), rep.to_dict(), spec)
    write_csv(_path(spec, "spectrum.csv"), ["n", "re_lambda", "im_lambda", "taylor_pred", "remainder"],
              rep.csv_rows(), spec)
    return 0


def _initial_data(eps, delta, N):
    from .dynamics import WaveProvider, perturbation_profile, zero_space
    provider = WaveProvider(N)
    w = provider(eps)
    f0 = w.u.truncate(N)
    if delta:
        f0 = f0 + perturbation_profile(w, N, zero_space(w)) * delta
    return w, f0, provider


def cmd_simulate(args, spec):
    from . import dynamics as dy
    from .spectral import TrigField, norm
    N = args.modes
    w, f0, provider = _initial_data(args.eps, args.delta, N)
    fmax = float(np.max(np.abs(f0(np.linspace(0, 2 * np.pi, 4 * N, endpoint=False)))))
    dt = args.dt or 0.8 * dy.cfl_limit(N, fmax)
    cfg = dy.SimConfig(N=N, dt=dt, frame=args.frame, v=w.v, record_every=args.record_every)
    rows = []
    st = {"eps": args.eps, "a": 0.0, "t": 0.0}
    fit = not args.no_fit and args.eps != 0

    def observe(t, c):
        d = dy.diagnostics(c, N)
        e = a = gh = math.nan
        if fit:
            f = TrigField.from_complex(c, N)
            a_guess = st["a"] + provider(st["eps"]).v * (t - st["t"])
            fs = dy.frame_fit(f, st["eps"], a_guess, provider)
            st["eps"], st["a"], st["t"] = fs.eps, fs.a, t
            e, a, gh = fs.eps, fs.a, norm(fs.g, "H4")
        rows.append((t, d["l2"], d["mean"], d["max_slope"], d["tail_fraction"], e, a, gh))
        return False

    observe(0.0, f0.to_complex(N))
    final, _ = dy.simulate(f0, cfg, args.t_end, observe)
    write_csv(_path(spec, "run.csv"), RUN_CSV_HEADER, rows, spec)
    write_json(_path(spec, "simulate.json"), {"config": asdict(cfg), "final": final.f.to_dict(),
                                              "final_diagnostics": final.diagnostics}, spec)
    if fit:
        write_svg(_path(spec, "g_h4.svg"), [(r[0], r[7]) for r in rows],
                  {"title": "perturbation size", "xlabel": "t", "ylabel": "||g||_H4",
                   "logy": True}, spec)
    return 0


def cmd_lifespan(args, spec):
    from . import dynamics as dy
    eps_list = args.eps
    if len(eps_list) < 3:
        raise ValidationError("--eps needs at least 3 values")
    N = args.modes
    dt = min(0.8 * dy.cfl_limit(N, 1.3 * max(eps_list) + 0.1), 0.01)
    every = max(1, int(round(args.sample_dt / dt)))
    cfg = dy.SimConfig(N=N, dt=dt, record_every=every)
    rule = dy.delta_rule(args.delta_rule, args.delta_c)
    t_max = args.t_max if args.t_max else (lambda e, d: 40.0 / (e * d))
    res = dy.sweep_lifespan(eps_list, rule, cfg, t_max, workers=args.workers)
    for r in res.records:
        rows = [(s[0], d["l2"], d["mean"], d["max_slope"], d["tail_fraction"], s[2], s[3], s[1])
                for s, d in zip(r.samples, r.diagnostics)]
        write_csv(_path(spec, f"run_eps{r.eps:g}.csv"), RUN_CSV_HEADER, rows, spec)
    write_csv(_path(spec, "lifespan.csv"), SWEEP_CSV_HEADER, res.table(), spec)
    write_json(_path(spec, "lifespan.json"), {
        "config": asdict(cfg), "delta_rule": args.delta_rule, "delta_c": args.delta_c,
        "records": [{k: v for k, v in r.to_dict().items() if k not in ("samples", "diagnostics")}
                    for r in res.records],
        "slope_A": res.slope_A, "slope_A_se": res.slope_A_se,
        "slope_B": res.slope_B, "slope_B_se": res.slope_B_se}, spec)
    done = [r for r in res.records if r.stop_reason == "doubling"]
    pts = [(1 / (r.eps * r.delta), r.T_obs) for r in done]
    fit = None
    if res.slope_A is not None:
        x = np.log10([p[0] for p in pts])
        y = np.log10([p[1] for p in pts])
        fit = (res.slope_A, float(np.mean(y) - res.slope_A * np.mean(x)))
    write_svg(_path(spec, "lifespan.svg"), pts,
              {"title": "doubling time", "xlabel": "1/(eps delta)", "ylabel": "T_obs",
               "logx": True, "logy": True, "style": "scatter", "fit": fit}, spec)
    return 0


def cmd_frame(args, spec):
    from . import dynamics as dy
    from .spectral import TrigField, norm
    N = args.modes
    if args.eps == 0:
        raise ValidationError("the frame needs eps != 0")
    provider = dy.WaveProvider(N)
    w = provider(args.eps)
    f = w.u.truncate(N).shift(args.a)
    pert = 0.0
    if args.perturb:
        rng = np.random.default_rng(args.seed)
        k = np.arange(1, N + 1)
        damp = np.exp(-0.5 * k)
        eta = TrigField(0.0, rng.standard_normal(N) * damp, rng.standard_normal(N) * damp)
        eta = eta * (args.perturb / norm(eta, "H2"))
        f = f + eta
        pert = norm(eta, "H2")
    eg = args.eps if args.eps_guess is None else args.eps_guess
    ag = args.a if args.a_guess is None else args.a_guess
    fs = dy.frame_fit(f, eg, ag, provider)
    write_json(_path(spec, "frame.json"), {
        "eps": fs.eps, "a": fs.a, "fit_residual": fs.fit_residual, "iterations": fs.iterations,
        "g_L2": norm(fs.g, "L2"), "g_H4": norm(fs.g, "H4"), "perturbation_H2": pert,
        "g": fs.g.to_dict()}, spec)
    return 0


COMMANDS = {"wave": cmd_wave, "constants": cmd_constants, "spectrum": cmd_spectrum,
            "simulate": cmd_simulate, "lifespan": cmd_lifespan, "frame": cmd_frame}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        spec = runspec_of(args)
        os.makedirs(spec.output_dir, exist_ok=True)
        return COMMANDS[args.subcommand](args, spec)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        out = getattr(locals().get("spec"), "output_dir", None)
        if out:
            diag = {"error": type(exc).__name__, "message": str(exc)}
            for attr in ("history", "report", "t", "eps"):
                if hasattr(exc, attr):
                    diag[attr] = getattr(exc, attr)
            write_json(os.path.join(out, "failure.json"), diag, locals()["spec"])
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
