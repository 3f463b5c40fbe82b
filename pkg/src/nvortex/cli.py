"""Command-line front end.

Subcommands: equilibrium, continue, simulate, validate, robin.  Runs are
configured by an INI file with sections [system], [domain], [solver],
[output]; command-line flags override file values.  Exit codes: 0 on
success, 1 on a domain-level failure (degenerate equilibrium, convergence
below quota, validation above threshold), 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import configparser
import io
import os
import sys
import tempfile

import numpy as np

from . import core, dynamics, equilibria, loops, reduction
from .errors import LeftDomain, NoConvergence, VortexError, ZeroTotalVorticity

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


# ---------------------------------------------------------------------------
# configuration

DEFAULT_CONFIG = {
    "system": {"gammas": "1,1", "seed": "pair", "separation": "2.0",
               "side": "1.0", "radius": "1.0", "n": "2"},
    "domain": {"variant": "disk", "a0_guess": "0,0"},
    "solver": {"modes": "32", "fp_tol": "1e-11", "newton_tol": "1e-11",
               "max_iter": "200", "contraction_guard": "0.9",
               "mode": "FixedPoint", "r_max": "0.2", "r_min": "1e-3",
               "r_points": "30"},
    "output": {"dir": ".", "prefix": "orbit"},
}


class RunConfig:
    """Parsed and validated configuration for a run."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        sysal = parser["system"]
        try:
            self.gammas = np.array(
                [float(x) for x in sysal["gammas"].split(",")])
        except ValueError as exc:
            raise ValueError(f"[system] gammas: {exc}") from exc
        self.seed = sysal.get("seed", "pair").lower()
        if self.seed not in ("pair", "triangle", "thomson"):
            raise ValueError(f"[system] seed: unknown type {self.seed!r}")
        self.separation = sysal.getfloat("separation", 2.0)
        self.side = sysal.getfloat("side", 1.0)
        self.radius = sysal.getfloat("radius", 1.0)
        self.n = sysal.getint("n", len(self.gammas))

        dom = parser["domain"]
        variant = dom.get("variant", "disk")
        params = {}
        if variant == "quadratic":
            try:
                params["matrix"] = [
                    [float(x) for x in row.split(",")]
                    for row in dom["matrix"].split(";")]
            except (KeyError, ValueError) as exc:
                raise ValueError(f"[domain] matrix: {exc}") from exc
        try:
            self.domain = core.domain_from_spec(variant, params)
        except ValueError as exc:
            raise ValueError(f"[domain] variant: {exc}") from exc
        self.a0_guess = np.array(
            [float(x) for x in dom.get("a0_guess", "0,0").split(",")])

        sol = parser["solver"]
        try:
            self.params = reduction.SolverParams(
                modes=sol.getint("modes", 32),
                fp_tol=sol.getfloat("fp_tol", 1e-11),
                newton_tol=sol.getfloat("newton_tol", 1e-11),
                max_iter=sol.getint("max_iter", 200),
                contraction_guard=sol.getfloat("contraction_guard", 0.9),
                mode=sol.get("mode", "FixedPoint"),
                r_max=sol.getfloat("r_max", 0.2),
                r_min=sol.getfloat("r_min", 1e-3),
                r_points=sol.getint("r_points", 30),
            )
        except ValueError as exc:
            raise ValueError(f"[solver]: {exc}") from exc

        out = parser["output"]
        self.out_dir = out.get("dir", ".")
        self.prefix = out.get("prefix", "orbit")

    def vortex_system(self) -> core.VortexSystem:
        if self.seed == "thomson":
            return core.VortexSystem(np.full(self.n, self.gammas[0]))
        return core.VortexSystem(self.gammas)

    def seed_equilibrium(self) -> equilibria.RelativeEquilibrium:
        if self.seed == "pair":
            if len(self.gammas) != 2:
                raise ValueError("[system] pair seed needs two gammas")
            return equilibria.make_pair(*self.gammas, self.separation)
        if self.seed == "triangle":
            if len(self.gammas) != 3:
                raise ValueError("[system] triangle seed needs three gammas")
            return equilibria.make_triangle(*self.gammas, self.side)
        return equilibria.make_thomson(self.n, self.gammas[0], self.radius)

    def dump(self) -> str:
        buf = io.StringIO()
        self.parser.write(buf)
        return buf.getvalue()


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULT_CONFIG)
    if path is not None:
        if not os.path.exists(path):
            raise ValueError(f"config file not found: {path}")
        parser.read(path)
    for (section, key), value in (overrides or {}).items():
        if value is not None:
            parser[section][key] = str(value)
    return RunConfig(parser)


# ---------------------------------------------------------------------------
# output helpers

def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(times: np.ndarray, states: np.ndarray) -> str:
    n = states.shape[1] // 2
    header = "t," + ",".join(f"x{k+1},y{k+1}" for k in range(n))
    lines = [header]
    for t, row in zip(times, states):
        lines.append(",".join(f"{v:.17g}" for v in np.concatenate([[t], row])))
    return "\n".join(lines) + "\n"


def trajectory_svg(states: np.ndarray, domain: core.DomainModel,
                   size: int = 480) -> str:
    """Minimal SVG: one polyline per vortex plus the domain boundary."""
    n = states.shape[1] // 2
    pts = states.reshape(len(states), n, 2)
    lo = pts.reshape(-1, 2).min(axis=0)
    hi = pts.reshape(-1, 2).max(axis=0)
    if domain.variant == "disk":
        lo = np.minimum(lo, [-1.0, -1.0])
        hi = np.maximum(hi, [1.0, 1.0])
    span = max(float(np.max(hi - lo)), 1e-9) * 1.1
    center = 0.5 * (lo + hi)

    def to_px(p):
        q = (p - center) / span + 0.5
        return q[0] * size, (1.0 - q[1]) * size

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
              "#8c564b", "#e377c2", "#7f7f7f"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size}" viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    if domain.variant == "disk":
        cx, cy = to_px(np.zeros(2))
        rx, _ = to_px(np.array([1.0, 0.0]))
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" '
                     f'r="{abs(rx - cx):.2f}" fill="none" stroke="black"/>')
    elif domain.variant == "halfplane":
        x0, y0 = to_px(np.array([center[0] - span, 0.0]))
        x1, y1 = to_px(np.array([center[0] + span, 0.0]))
        parts.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" '
                     f'y2="{y1:.2f}" stroke="black"/>')
    for k in range(n):
        path = " ".join("%.2f,%.2f" % to_px(p) for p in pts[:, k, :])
        parts.append(f'<polyline points="{path}" fill="none" '
                     f'stroke="{colors[k % len(colors)]}" stroke-width="1.2"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# subcommands

def cmd_equilibrium(args) -> int:
    gammas = [float(x) for x in args.gamma.split(",")]
    if args.type == "pair":
        if len(gammas) != 2 or args.sep is None:
            print("pair needs --gamma g1,g2 and --sep", file=sys.stderr)
            return EXIT_USAGE
        eq = equilibria.make_pair(gammas[0], gammas[1], args.sep)
    elif args.type == "triangle":
        if len(gammas) != 3 or args.side is None:
            print("triangle needs --gamma g1,g2,g3 and --side", file=sys.stderr)
            return EXIT_USAGE
        eq = equilibria.make_triangle(*gammas, args.side)
    else:
        if args.n is None or len(gammas) != 1 or args.radius is None:
            print("thomson needs --n, --gamma g and --radius", file=sys.stderr)
            return EXIT_USAGE
        eq = equilibria.make_thomson(args.n, gammas[0], args.radius)

    residual = equilibria.residual_HS0(eq)
    print(f"z     = {np.array2string(eq.z, precision=12)}")
    print(f"omega = {eq.omega:.12g}")
    print(f"residual = {residual:.3e}")
    code = EXIT_OK if residual < 1e-10 else EXIT_FAIL
    if args.check:
        report = equilibria.monodromy(equilibria.normalize_period(eq))
        print("multipliers:")
        for mu in report.multipliers:
            print(f"  {mu.real:+.9f} {mu.imag:+.9f}i  (|mu| = {abs(mu):.9f})")
        print(f"kernel_dim = {report.kernel_dim}")
        verdict = report.nondegenerate
        if args.type == "triangle":
            # the algebraic conditions also catch degeneracy that appears
            # only in generalized eigenvectors of the monodromy
            cond = equilibria.triangle_conditions(*gammas)
            print(f"triangle conditions: gamma_ok={cond.gamma_ok} "
                  f"L_ok={cond.L_ok} L_neq_sumsq={cond.L_neq_sumsq}")
            verdict = verdict and cond.predicted_nondegenerate
        print("verdict: " + ("nondegenerate" if verdict else "DEGENERATE"))
        if not verdict:
            code = EXIT_FAIL
    return code


def cmd_continue(args) -> int:
    overrides = {
        ("solver", "r_max"): args.r_max,
        ("solver", "r_min"): args.r_min,
        ("solver", "r_points"): args.r_steps,
        ("solver", "modes"): args.modes,
        ("solver", "mode"): {"fixedpoint": "FixedPoint", "newton": "Newton",
                             None: None}[args.mode],
        ("output", "dir"): args.out,
    }
    cfg = load_config(args.config, overrides)
    if args.dump_config:
        print(cfg.dump(), end="")
        return EXIT_OK

    vsys = cfg.vortex_system()
    if abs(vsys.gamma_total) < 1e-14:
        print("total vorticity is zero: hypothesis fails", file=sys.stderr)
        return EXIT_USAGE
    seed = equilibria.normalize_period(cfg.seed_equilibrium())
    frame = loops.build_frame(seed.z, seed.omega, vsys.n, cfg.params.modes)
    crit = core.find_critical_point_h(cfg.domain, cfg.a0_guess)
    if not crit.nondegenerate:
        print("critical point of the regular part is degenerate",
              file=sys.stderr)
        return EXIT_FAIL
    try:
        path = reduction.continue_path(vsys, cfg.domain, crit.point, frame,
                                       cfg.params)
    except ZeroTotalVorticity as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE

    os.makedirs(cfg.out_dir, exist_ok=True)
    lines = [f"{'r':>12} {'vnorm':>13} {'residual':>13} {'phase':>13} "
             f"{'iters':>5}"]
    for entry in path.entries:
        doc = reduction.orbit_to_dict(vsys, cfg.domain, path.a0, seed.omega,
                                      entry)
        fname = os.path.join(cfg.out_dir, f"{cfg.prefix}_r{entry.r:.6g}.json")
        reduction.save_orbit(fname, doc)
        lines.append(f"{entry.r:12.6g} {entry.vnorm:13.6e} "
                     f"{entry.residual_grad:13.6e} {entry.phase_defect:13.6e} "
                     f"{entry.iterations:5d}")
    lines.append(f"empirical r0 = {path.r0_empirical:.6g}")
    for r, msg in path.failures.items():
        lines.append(f"FAILED r={r:.6g}: {msg}")
    summary = "\n".join(lines) + "\n"
    _atomic_write(os.path.join(cfg.out_dir, f"{cfg.prefix}_summary.txt"),
                  summary)
    print(summary, end="")
    quota = 0.8 * cfg.params.r_points
    return EXIT_OK if len(path.entries) >= quota else EXIT_FAIL


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    vsys = core.VortexSystem(cfg.gammas if cfg.seed != "thomson"
                             else np.full(cfg.n, cfg.gammas[0]))
    z0 = np.array([float(x) for x in args.z0.split(",")])
    if z0.size != 2 * vsys.n:
        print(f"--z0 needs {2 * vsys.n} numbers", file=sys.stderr)
        return EXIT_USAGE
    domain = cfg.domain if args.mode != "plane" else core.Plane()
    t_eval = np.linspace(0.0, args.time, args.samples)
    traj = dynamics.integrate(vsys, domain, args.mode, z0, args.time,
                              r=args.r, t_eval=t_eval)
    _atomic_write(args.csv, trajectory_csv(traj.times, traj.states))
    if args.svg:
        _atomic_write(args.svg, trajectory_svg(traj.states, domain))
    inv = dynamics.invariants_along(vsys, domain, traj, r=args.r)
    for key, value in inv.items():
        print(f"{key} = {value:.3e}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        doc = reduction.load_orbit(args.orbit)
        vsys = core.VortexSystem(doc["system"]["gammas"])
        domain = core.domain_from_spec(doc["domain"]["variant"],
                                       doc["domain"]["params"])
        u = loops.loop_from_dict(doc["loop"])
        a0 = np.array(doc["a0"])
        r = float(doc["r"])
        diag = doc["diagnostics"]
    except (VortexError, KeyError, ValueError, OSError) as exc:
        print(f"cannot read orbit file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sol = reduction.ReducedSolution(
        r=r, v=u, u=u, residual_grad=diag["residual_grad"],
        phase_defect=diag["phase_defect"], vnorm=diag["vnorm"],
        iterations=diag["iterations"], spectral_tail=0.0)
    orbit = reduction.unrescale(a0, r, sol, args.samples, domain=domain)
    report = dynamics.validate_orbit(vsys, domain, orbit, rtol=args.rtol)
    print(f"closure_error = {report['closure_error']:.6e}")
    print(f"max_pointwise_defect = {report['max_pointwise_defect']:.6e}")
    if args.csv:
        _atomic_write(args.csv, trajectory_csv(orbit.times, orbit.samples))
    if args.svg:
        _atomic_write(args.svg, trajectory_svg(orbit.samples, domain))
    return EXIT_OK if report["closure_error"] <= args.tol else EXIT_FAIL


def cmd_robin(args) -> int:
    domain = core.domain_from_spec(args.domain)
    guess = np.array([float(x) for x in args.guess.split(",")])
    try:
        crit = core.find_critical_point_h(domain, guess)
    except (NoConvergence, LeftDomain) as exc:
        print(f"no critical point found: {exc}", file=sys.stderr)
        return EXIT_FAIL
    eigs = np.linalg.eigvalsh(crit.hessian)
    print(f"a0 = ({crit.point[0]:.12g}, {crit.point[1]:.12g})")
    print(f"h(a0) = {core.eval_h(domain, crit.point):.12g}")
    print("hessian =")
    for row in crit.hessian:
        print(f"  [{row[0]:+.12g}, {row[1]:+.12g}]")
    print(f"eigenvalues = {eigs[0]:.12g}, {eigs[1]:.12g}")
    print("verdict: " + ("nondegenerate" if crit.nondegenerate
                         else "DEGENERATE"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvortex",
        description="Point-vortex equilibria, periodic orbits near an "
                    "interior point of a bounded domain, and validation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eq = sub.add_parser("equilibrium", help="construct and check a "
                          "relative equilibrium")
    p_eq.add_argument("--type", required=True,
                      choices=["pair", "triangle", "thomson"])
    p_eq.add_argument("--gamma", required=True)
    p_eq.add_argument("--n", type=int)
    p_eq.add_argument("--sep", type=float)
    p_eq.add_argument("--side", type=float)
    p_eq.add_argument("--radius", type=float)
    p_eq.add_argument("--check", action="store_true")
    p_eq.set_defaults(func=cmd_equilibrium)

    p_ct = sub.add_parser("continue", help="continuation of periodic orbits "
                          "in the scale parameter r")
    p_ct.add_argument("--config")
    p_ct.add_argument("--r-max", type=float, dest="r_max")
    p_ct.add_argument("--r-min", type=float, dest="r_min")
    p_ct.add_argument("--r-steps", type=int, dest="r_steps")
    p_ct.add_argument("--modes", type=int)
    p_ct.add_argument("--mode", choices=["fixedpoint", "newton"])
    p_ct.add_argument("--out")
    p_ct.add_argument("--dump-config", action="store_true")
    p_ct.set_defaults(func=cmd_continue)

    p_sim = sub.add_parser("simulate", help="direct time integration")
    p_sim.add_argument("--config")
    p_sim.add_argument("--z0", required=True)
    p_sim.add_argument("--time", type=float, required=True)
    p_sim.add_argument("--mode", default="physical",
                       choices=["physical", "rescaled", "plane"])
    p_sim.add_argument("--r", type=float, default=0.0)
    p_sim.add_argument("--samples", type=int, default=512)
    p_sim.add_argument("--csv", default="trajectory.csv")
    p_sim.add_argument("--svg")
    p_sim.set_defaults(func=cmd_simulate)

    p_val = sub.add_parser("validate", help="re-integrate an orbit file and "
                           "check period closure")
    p_val.add_argument("--orbit", required=True)
    p_val.add_argument("--rtol", type=float, default=1e-10)
    p_val.add_argument("--tol", type=float, default=1e-6)
    p_val.add_argument("--samples", type=int, default=256)
    p_val.add_argument("--csv")
    p_val.add_argument("--svg")
    p_val.set_defaults(func=cmd_validate)

    p_rob = sub.add_parser("robin", help="critical point of the regular part")
    p_rob.add_argument("--domain", required=True,
                       choices=["disk", "halfplane"])
    p_rob.add_argument("--guess", default="0.3,-0.2")
    p_rob.set_defaults(func=cmd_robin)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VortexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
