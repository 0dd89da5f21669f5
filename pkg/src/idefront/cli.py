"""Command-line interface: ``idefront <command> --config FILE ...``.

Exit codes are 0 on success, 2 when the input fails validation, 3 when a
computation does not converge or cannot produce its result, and 64 on usage
errors.
"""
from __future__ import annotations

import argparse
import json
import math
import shutil
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .dynamics import Dynamics, extract_profile, front_position, track_front
from .eigen import EIGEN_RTOL, LEFTWARD, RESIDUAL_RTOL, RIGHTWARD, assemble, principal_eigen
from .errors import (
    ConvergenceError,
    DomainError,
    IdefrontError,
    ParseError,
    RangeError,
    SchemaError,
    ValidationError,
)
from .habitat import PeriodicField, Problem, load_config
from .kernel import kernel_to_spec
from .speeds import (
    RecursionSystem,
    check_hypotheses,
    determinacy_verdict,
    linearized_multipliers,
    recursion_bracket,
    spreading_speed,
)
from .speeds.minimize import COARSE_SAMPLES, MU_TOL
from .speeds.recursion import BRACKET_WIDTH, MAX_STEPS
from .steady import STEADY_TOL, persistence_eigenvalue, scalar_steady_state, semi_trivial_states
from .svg import PlotSpec, render_svg

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_USAGE = 64

_VALIDATION_ERRORS = (ParseError, ValidationError, SchemaError, DomainError, RangeError)

FIGURES = {"fig1": "patchy_laplace.toml", "fig2": "patchy_mixed.toml"}
FIGURE_STEPS = (2, 4, 6, 8)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- output helpers -----------------------------------------------------------

def _clean(obj):
    """Make ``obj`` JSON-safe: NaN and infinities become null, arrays lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_csv(path: Path, header: tuple[str, ...], columns) -> None:
    """Write columns with full-precision floats so reruns are byte-identical."""
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) if not isinstance(v, (int, np.integer)) else str(int(v))
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


@dataclass
class RunManifest:
    """Everything needed to rerun a command that wrote an output directory.

    ``config_file`` is a verbatim copy of the input configuration in the same
    directory, and ``command`` reruns against that copy.
    """

    command: list[str]
    config: dict
    config_file: str
    version: str = __version__
    backend: str = ""
    started: str = ""
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)

    def write(self, out: Path) -> Path:
        path = out / "manifest.json"
        path.write_text(dumps(asdict(self)))
        return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _Output:
    """Collects files written into ``--out`` and finishes with a manifest."""

    def __init__(self, out: str | None, args, argv: list[str], problem: Problem, source: Path):
        self.dir = Path(out) if out else None
        self.files: list[str] = []
        self.started = _now()
        self.args, self.argv, self.problem, self.source = args, argv, problem, source
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path | None:
        if self.dir is None:
            return None
        self.files.append(name)
        return self.dir / name

    def finish(self, tolerances: dict) -> None:
        if self.dir is None:
            return
        copy = self.dir / "config.toml"
        if self.source.resolve() != copy.resolve():
            shutil.copyfile(self.source, copy)
        cmd = _rerun_command(self.argv, "config.toml")
        RunManifest(cmd, self.problem.config, "config.toml", backend=_backend.BACKEND,
                    started=self.started, finished=_now(), outputs=sorted(self.files),
                    tolerances=tolerances).write(self.dir)


def _rerun_command(argv: list[str], config_name: str) -> list[str]:
    out, skip = ["idefront"], False
    for i, a in enumerate(argv):
        if skip:
            skip = False
            continue
        if a == "--config":
            out += ["--config", config_name]
            skip = True
        elif a.startswith("--config="):
            out.append(f"--config={config_name}")
        elif a in ("--out",):
            out += ["--out", "."]
            skip = True
        elif a.startswith("--out="):
            out.append("--out=.")
        else:
            out.append(a)
    return out


def _emit(args, payload: dict, lines: list[str]) -> None:
    if args.json:
        sys.stdout.write(dumps(payload))
    else:
        sys.stdout.write("\n".join(lines) + "\n")


def _table(rows: list[tuple[str, object]]) -> list[str]:
    width = max(len(k) for k, _ in rows)
    out = []
    for k, v in rows:
        if isinstance(v, float):
            v = f"{v:.10g}"
        out.append(f"{k.ljust(width)}  {v}")
    return out


# -- commands -----------------------------------------------------------------

def _multiplier(problem: Problem, which: str, q_star: np.ndarray | None):
    hab = problem.habitat
    if which == "r1":
        return hab.r1, problem.k1
    if which == "r2":
        return hab.r2, problem.k2
    mult = linearized_multipliers(hab, q_star, problem.grid)
    if which == "linearized1":
        return mult["u"], problem.k1
    return mult["v"], problem.k2


def cmd_validate(args, problem: Problem, argv, source) -> int:
    hab = problem.habitat
    summary = {"grid": {"L": problem.grid.L, "n": problem.grid.n,
                        "sim_periods": problem.grid.sim_periods, "h": problem.grid.h},
               "habitat": hab.summary(),
               "kernels": {"k1": kernel_to_spec(problem.k1), "k2": kernel_to_spec(problem.k2)},
               "run": asdict(problem.run)}
    rows = [("grid", f"L={problem.grid.L:g} n={problem.grid.n} sim_periods={problem.grid.sim_periods}")]
    for name, mm in summary["habitat"].items():
        rows.append((name, f"min={mm['min']:.6g} max={mm['max']:.6g}"))
    rows += [("k1", repr(problem.k1)), ("k2", repr(problem.k2))]
    _emit(args, summary, ["configuration is valid"] + _table(rows))
    return EXIT_OK


def cmd_eigen(args, problem: Problem, argv, source) -> int:
    out = _Output(args.out, args, argv, problem, source)
    q_star = None
    if args.m.startswith("linearized"):
        q_star = semi_trivial_states(problem.habitat, problem.k1, problem.k2, problem.grid)[1].values
    m, k = _multiplier(problem, args.m, q_star)
    direction = LEFTWARD if args.leftward else RIGHTWARD
    op = assemble(m, k, problem.grid, args.mu, direction)
    res = principal_eigen(op, rtol=args.rtol, res_tol=args.res_tol)
    payload = {"multiplier": args.m, "mu": args.mu, "direction": direction,
               "lambda": res.lam, "residual": res.residual, "iterations": res.iterations}
    if args.curve:
        try:
            lo, hi, cnt = args.curve.split(":")
            mus = np.linspace(float(lo), float(hi), int(cnt))
        except ValueError:
            raise ValidationError(f"--curve expects mu0:mu1:count, got {args.curve!r}") from None
        lams, phi = [], None
        for mu in mus:
            r = principal_eigen(assemble(m, k, problem.grid, float(mu), direction), phi,
                                rtol=args.rtol, res_tol=args.res_tol)
            lams.append(r.lam)
            phi = r.vector
        lams = np.array(lams)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(mus != 0, np.log(lams) / np.where(mus != 0, mus, 1.0), np.nan)
        payload["curve"] = {"mu": mus, "lambda": lams, "log_lambda_over_mu": g}
        p = out.path("curve.csv")
        if p is not None:
            write_csv(p, ("mu", "lambda", "log_lambda_over_mu"), (mus, lams, g))
            render_svg([p], PlotSpec("mu", "log_lambda_over_mu", title=f"ln(lambda)/mu for {args.m}",
                                     ylabel="ln(lambda)/mu", labels=(args.m,), mark_min=True),
                       out.path("curve.svg"))
    out.finish({"rtol": args.rtol, "res_tol": args.res_tol})
    _emit(args, payload, _table([("lambda", res.lam), ("residual", res.residual),
                                 ("iterations", res.iterations)]))
    return EXIT_OK


def cmd_steady(args, problem: Problem, argv, source) -> int:
    out = _Output(args.out, args, argv, problem, source)
    hab, grid = problem.habitat, problem.grid
    if args.species == 1:
        r, b, k = hab.r1, hab.b1, problem.k1
    else:
        r, b, k = hab.r2, hab.b2, problem.k2
    st = scalar_steady_state(r, b, k, grid, tol=args.tol)
    p = out.path(f"steady_{args.species}.csv")
    if p is not None:
        write_csv(p, ("x", "value"), (grid.x, st.values))
    out.finish({"tol": args.tol})
    payload = {"species": args.species, "lambda": st.lambda0, "status": st.status,
               "iterations": st.iterations, "residual": st.residual,
               "min": float(st.values.min()), "max": float(st.values.max()),
               "x": grid.x, "value": st.values}
    _emit(args, payload, _table([("lambda(k,r)", st.lambda0), ("status", st.status),
                                 ("iterations", st.iterations), ("residual", st.residual),
                                 ("min", float(st.values.min())), ("max", float(st.values.max()))]))
    return EXIT_OK


def cmd_speed(args, problem: Problem, argv, source) -> int:
    out = _Output(args.out, args, argv, problem, source)
    hab, grid = problem.habitat, problem.grid
    direction = LEFTWARD if args.leftward else RIGHTWARD
    if args.linearized:
        q_star = semi_trivial_states(hab, problem.k1, problem.k2, grid)[1].values
        m, k = linearized_multipliers(hab, q_star, grid)["u"], problem.k1
        label = "linearized"
    elif args.species == 1:
        m, k, label = hab.r1, problem.k1, "species 1"
    else:
        m, k, label = hab.r2, problem.k2, "species 2"
    rep = spreading_speed(m, k, grid, direction, samples=args.samples, tol=args.mu_tol)
    p = out.path("speed_curve.csv")
    if p is not None:
        mus = np.array([c[0] for c in rep.curve])
        g = np.array([c[1] for c in rep.curve])
        write_csv(p, ("mu", "lambda", "log_lambda_over_mu"), (mus, np.exp(g * mus), g))
        (out.dir / "speed.json").write_text(dumps(rep.to_dict()))
        out.files.append("speed.json")
        render_svg([p], PlotSpec("mu", "log_lambda_over_mu", title=f"{label}, {direction}",
                                 ylabel="ln(lambda)/mu", labels=(label,), mark_min=True),
                   out.path("speed_curve.svg"))
    out.finish({"mu_tol": args.mu_tol, "samples": args.samples})
    _emit(args, rep.to_dict(), _table([("c", rep.c), ("mu0", rep.mu0), ("lambda(mu0)", rep.lambda_mu0),
                                       ("direction", rep.direction), ("method", rep.method)]))
    return EXIT_OK


def cmd_check(args, problem: Problem, argv, source) -> int:
    rep = check_hypotheses(problem.habitat, problem.k1, problem.k2, problem.grid,
                           seeds=args.seeds, h3_steps=args.h3_steps, rng_seed=args.rng_seed)
    lines = [f"{name:3s} {c.verdict:9s} margin {c.margin: .6g}  {c.detail}"
             for name, c in rep.checks.items()]
    _emit(args, rep.to_dict(), lines)
    return EXIT_OK


def cmd_bracket(args, problem: Problem, argv, source) -> int:
    hab, grid = problem.habitat, problem.grid
    if args.scalar:
        system = RecursionSystem.scalar(hab.r1, hab.C1, problem.k1, grid)
    else:
        system = RecursionSystem.cooperative(hab, problem.k1, problem.k2, grid)
    br = recursion_bracket(system, args.cmin, args.cmax, args.halfwidth, args.width,
                           max_steps=args.max_steps)
    payload = br.to_dict()
    lines = _table([("lower speed in", f"[{br.lower[0]:.6g}, {br.lower[1]:.6g}]"),
                    ("upper speed in", f"[{br.upper[0]:.6g}, {br.upper[1]:.6g}]")])
    lines += [f"  c = {e.c:.6g}: {e.outcome} after {e.steps} steps" for e in br.evaluations]
    _emit(args, payload, lines)
    return EXIT_OK


def _run_simulation(problem: Problem, steps: int, snapshot: int, extra=()):
    dyn = Dynamics(problem.habitat, problem.k1, problem.k2, problem.grid, problem.run.boundary)
    kind = problem.run.initial
    if kind not in ("step", "periodic") and problem.base_dir is not None:
        kind = str(problem.base_dir / kind)
    init = dyn.initial_state(kind)
    return dyn.simulate(init, steps, 1, tuple(extra)), dyn


def _write_simulation(out: _Output, traj, trace, snapshot_steps) -> None:
    x = traj.x
    names = []
    for n in snapshot_steps:
        p = out.path(f"snapshot_{n}.csv")
        s = traj.at(n)
        write_csv(p, ("x", "p", "q"), (x, s.p, s.q))
        names.append(p)
    write_csv(out.path("front.csv"), ("n", "x_front"), (trace.steps, trace.positions))
    if names:
        render_svg(names, PlotSpec("x", "p", title="species 1", ylabel="p_n"), out.path("p.svg"))
        render_svg(names, PlotSpec("x", "q", title="species 2", ylabel="q_n"), out.path("q.svg"))


def cmd_simulate(args, problem: Problem, argv, source) -> int:
    steps = args.steps or problem.run.steps
    every = args.snapshot or problem.run.snapshot
    theta = args.theta if args.theta is not None else problem.run.threshold
    out = _Output(args.out, args, argv, problem, source)
    traj, _ = _run_simulation(problem, steps, every)
    trace = track_front(traj, theta)
    payload = {"speed": trace.speed, "stderr": trace.stderr, "threshold": trace.threshold,
               "fit_from": trace.fit_from, "steps": steps}
    if out.dir is not None:
        snaps = [n for n in traj.steps if n > 0 and (n % every == 0 or n == steps)]
        snaps += [n for n in problem.run.snapshots if n in traj.steps and n not in snaps]
        _write_simulation(out, traj, trace, sorted(snaps))
        out.path("speed.json").write_text(dumps(payload))
    out.finish({"threshold": trace.threshold})
    _emit(args, payload, _table([("front speed", trace.speed), ("stderr", trace.stderr),
                                 ("threshold", trace.threshold), ("steps", steps)]))
    return EXIT_OK


def cmd_profile(args, problem: Problem, argv, source) -> int:
    steps = args.steps or problem.run.steps
    out = _Output(args.out, args, argv, problem, source)
    traj, _ = _run_simulation(problem, steps, 1)
    prof = extract_profile(traj, args.c)
    xi = np.repeat(prof.xi, prof.theta.size)
    th = np.tile(prof.theta, prof.xi.size)
    U, V = prof.U.ravel(), prof.V.ravel()
    keep = np.isfinite(U) & np.isfinite(V)
    p = out.path("profile.csv")
    if p is not None:
        write_csv(p, ("xi", "x_mod_L", "U", "V"), (xi[keep], th[keep], U[keep], V[keep]))
    out.finish({})
    payload = {"c": prof.c, "monotonicity_defect": prof.monotonicity_defect,
               "monotonicity_defect_v": prof.monotonicity_defect_v,
               "period_defect": prof.period_defect, "points": int(keep.sum())}
    _emit(args, payload, _table([("c", prof.c), ("monotonicity defect", prof.monotonicity_defect),
                                 ("period defect", prof.period_defect)]))
    return EXIT_OK


def figure_summary(traj, dyn, theta: float, steps=FIGURE_STEPS) -> dict:
    """Front positions and the largest q left behind each front.

    The invaded region at step n is x < min(0, x_front(n) - L), the part of
    the initial p territory that stays one period behind the front. ``q``
    recedes when that maximum shrinks at every snapshot and ends below a
    tenth of max q*.
    """
    x = traj.x
    qmax = float(np.max(dyn.q_star))
    rows = []
    for n in steps:
        s = traj.at(n)
        xf = front_position(s.p, x, theta)
        region = x < min(0.0, xf - dyn.grid.L)
        q_behind = float(np.max(s.q[region])) if region.any() else math.nan
        rows.append({"n": n, "x_front": xf, "q_behind": q_behind,
                     "q_behind_ratio": q_behind / qmax})
    fronts = [r["x_front"] for r in rows]
    return {"snapshots": rows, "max_q_star": qmax,
            "front_advances": bool(fronts[-1] > fronts[0]),
            "front_monotone": bool(all(b >= a for a, b in zip(fronts, fronts[1:]))),
            "q_recedes": bool(all(b["q_behind"] < a["q_behind"] for a, b in zip(rows, rows[1:]))
                              and rows[-1]["q_behind_ratio"] < 0.1)}


def cmd_reproduce(args, problem: Problem, argv, source) -> int:
    out = _Output(args.out or args.figure, args, argv, problem, source)
    last = max(FIGURE_STEPS)
    traj, dyn = _run_simulation(problem, last, 1)
    trace = track_front(traj, problem.run.threshold)
    theta = trace.threshold
    _write_simulation(out, traj, trace, FIGURE_STEPS)
    summary = figure_summary(traj, dyn, theta)
    checks = check_hypotheses(problem.habitat, problem.k1, problem.k2, problem.grid)
    summary["hypotheses"] = checks.to_dict()
    out.path("summary.json").write_text(dumps(summary))
    out.finish({"threshold": theta})
    lines = [f"n = {r['n']}: front at x = {r['x_front']:.4f}, "
             f"max q behind = {r['q_behind']:.3g} ({r['q_behind_ratio']:.3g} of max q*)"
             for r in summary["snapshots"]]
    m = checks["M"]
    lines.append(f"M: {m.verdict} (margin {m.margin:.3g}): {m.detail}")
    lines.append(f"wrote {len(out.files) + 2} files to {out.dir}")
    _emit(args, summary, lines)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="idefront", description="Spreading speeds and invasion fronts of "
                 "two competing species in a periodic habitat.")
    ap.add_argument("--version", action="version", version=f"idefront {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, config=True):
        p = sub.add_parser(name, help=help_, description=help_)
        if config:
            p.add_argument("--config", required=True, help="TOML problem description")
        p.add_argument("--json", action="store_true", help="print machine-readable JSON")
        return p

    add("validate", "check a configuration and print a habitat summary")

    p = add("eigen", "principal eigenvalue of a weighted periodic operator")
    p.add_argument("--m", required=True, choices=("r1", "r2", "linearized1", "linearized2"))
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--leftward", action="store_true")
    p.add_argument("--curve", help="mu0:mu1:count, write curve.csv")
    p.add_argument("--rtol", type=float, default=EIGEN_RTOL)
    p.add_argument("--res-tol", type=float, default=RESIDUAL_RTOL)
    p.add_argument("--out")

    p = add("steady", "semi-trivial steady state of one species")
    p.add_argument("--species", type=int, choices=(1, 2), default=1)
    p.add_argument("--tol", type=float, default=STEADY_TOL)
    p.add_argument("--out")

    p = add("speed", "spreading speed as the minimum of ln(lambda(mu))/mu")
    p.add_argument("--linearized", action="store_true",
                   help="species 1 invading the resident species 2")
    p.add_argument("--leftward", action="store_true")
    p.add_argument("--species", type=int, choices=(1, 2), default=1)
    p.add_argument("--samples", type=int, default=COARSE_SAMPLES)
    p.add_argument("--mu-tol", type=float, default=MU_TOL)
    p.add_argument("--out")

    p = add("check", "evaluate the standing hypotheses and determinacy conditions")
    p.add_argument("--seeds", type=int, default=32)
    p.add_argument("--h3-steps", type=int, default=5000)
    p.add_argument("--rng-seed", type=int, default=0)

    p = add("bracket", "bisect trial speeds with the moving-frame recursion")
    p.add_argument("--cmin", type=float, required=True)
    p.add_argument("--cmax", type=float, required=True)
    p.add_argument("--width", type=float, default=BRACKET_WIDTH)
    p.add_argument("--halfwidth", type=float, default=None, help="frame window half width")
    p.add_argument("--max-steps", type=int, default=MAX_STEPS)
    p.add_argument("--scalar", action="store_true", help="species 1 alone")

    p = add("simulate", "run the competition model and track the invasion front")
    p.add_argument("--steps", type=int)
    p.add_argument("--snapshot", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--out")

    p = add("profile", "travelling-wave profile in the frame moving at speed c")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--out")

    p = add("reproduce", "rerun a bundled two-patch experiment", config=False)
    p.add_argument("figure", choices=sorted(FIGURES))
    p.add_argument("--config", help="use this file instead of the bundled preset")
    p.add_argument("--out")
    return ap


COMMANDS = {"validate": cmd_validate, "eigen": cmd_eigen, "steady": cmd_steady,
            "speed": cmd_speed, "check": cmd_check, "bracket": cmd_bracket,
            "simulate": cmd_simulate, "profile": cmd_profile, "reproduce": cmd_reproduce}


def dispatch(argv: list[str] | None = None) -> int:
    """Run one command and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "reproduce" and args.config is None:
            ref = resources.files("idefront") / "presets" / FIGURES[args.figure]
            with resources.as_file(ref) as path:
                problem = load_config(path)
                return COMMANDS[args.command](args, problem, argv + ["--config", str(path)], path)
        source = Path(args.config)
        problem = load_config(source)
        return COMMANDS[args.command](args, problem, argv, source)
    except _VALIDATION_ERRORS as exc:
        print(f"idefront: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, IdefrontError) as exc:
        print(f"idefront: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
