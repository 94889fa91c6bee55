"""Command line interface.

Every randomized subcommand requires --seed; outputs are bit-reproducible
for a given seed. Reports go to stdout as JSON unless --out is given;
delimited data goes to the path the subcommand names; --plot renders a
matplotlib figure next to it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .digraph import LatticeSpec, WeightedDigraph, validate
from .environment import Environment, green
from .experiments import TrajectoryRun, fit_power_law, green_tail, simulate_zd
from .integrability import exit_time_report, lattice_report, min_beta_at
from .kalikow import ballisticity_report, kalikow_transitions


def _read(path: str) -> str:
    return Path(path).read_text()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _load_graph(path: str) -> WeightedDigraph:
    g = WeightedDigraph.from_json(_read(path))
    validate(g)
    return g


def _parse_site(text: str) -> tuple:
    return tuple(int(c) for c in text.split(","))


def cmd_analyze(args) -> int:
    g = _load_graph(args.graph)
    moments = args.moment or []
    if args.vertex is not None:
        report = min_beta_at(g, args.vertex, moments=moments)
    else:
        report = exit_time_report(g, moments=moments)
    _emit(report.to_json(), args.out)
    return 0


def cmd_tail(args) -> int:
    g = _load_graph(args.graph)
    rng = np.random.default_rng(args.seed)
    estimate = green_tail(g, args.vertex, args.samples, rng)
    Path(args.csv).write_text(estimate.survival_csv())
    if args.plot:
        from .plots import plot_survival

        plot_survival(estimate, args.plot)
    _emit(estimate.to_json(), args.out)
    return 0


def cmd_green(args) -> int:
    g = _load_graph(args.graph)
    env = Environment.from_json(g, _read(args.env))
    domain = args.domain.split(",") if args.domain else None
    table = green(g, env, delta=args.delta, domain=domain)
    _emit(table.to_csv(), args.out)
    return 0


def cmd_kalikow(args) -> int:
    spec = LatticeSpec.from_json(_read(args.spec))
    if spec.box is None:
        raise SystemExit("kalikow needs a spec with a box (the domain U)")
    z0 = _parse_site(args.center) if args.center else (
        (0,) * spec.d if (0,) * spec.d in set(spec.box) else spec.box[0]
    )
    rng = np.random.default_rng(args.seed)
    walk = kalikow_transitions(spec, spec.box, z0, args.delta, args.samples, rng)
    report = ballisticity_report(spec.alpha, walk)
    _emit(report.to_json(), args.out)
    return 0


def cmd_zd_sim(args) -> int:
    data = json.loads(_read(args.spec))
    alpha = [float(a) for a in data["alpha"]]
    run = simulate_zd(alpha, args.traj, args.steps, seed=args.seed)
    Path(args.out).write_text(run.to_csv())
    if args.plot:
        from .plots import plot_trajectory

        plot_trajectory(run, args.plot)
    return 0


def cmd_fit(args) -> int:
    run = TrajectoryRun.from_csv(_read(args.run))
    grid = np.round(np.arange(args.grid_lo, args.grid_hi + 1e-9, args.grid_step), 10)
    window = None
    if args.window_lo is not None or args.window_hi is not None:
        lo = args.window_lo if args.window_lo is not None else run.n_max / 10.0
        hi = args.window_hi if args.window_hi is not None else float(run.n_max)
        window = (lo, hi)
    result = fit_power_law(run, grid=grid, window=window)
    if args.plot:
        from .plots import plot_trajectory

        plot_trajectory(run, args.plot, fit=result)
    _emit(result.to_json(), args.out)
    return 0


def cmd_criteria(args) -> int:
    spec = LatticeSpec.from_json(_read(args.spec))
    ball = ballisticity_report(spec.alpha)
    lattice = lattice_report(spec, args.moment)
    payload = json.loads(ball.to_json())
    payload["lattice"] = json.loads(lattice.to_json())
    _emit(json.dumps(payload, indent=2), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwde", description="Random walks in Dirichlet environment"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="integrability report for a graph")
    p.add_argument("graph", help="graph JSON file")
    p.add_argument("--vertex", help="root vertex (omit for the exit-time, all-vertices form)")
    p.add_argument("--moment", type=float, action="append", help="moment s to add a verdict for")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tail", help="tail exponent of G(o,o) by Monte Carlo")
    p.add_argument("graph")
    p.add_argument("--vertex", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--csv", default="tail_survival.csv", help="survival curve output (t, P(G>t))")
    p.add_argument("--plot", help="render the survival plot to this file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("green", help="Green function table for a stored environment")
    p.add_argument("graph")
    p.add_argument("--env", required=True, help="environment JSON file")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--domain", help="comma-separated vertex subset U")
    p.add_argument("--out")
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("kalikow", help="Kalikow walk transitions and drift report")
    p.add_argument("spec", help="lattice spec JSON with the domain as box")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--center", help="center site, e.g. '0,0' (defaults to the origin)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kalikow)

    p = sub.add_parser("zd-sim", help="annealed lattice trajectories, mean displacement CSV")
    p.add_argument("spec", help="JSON with d and alpha")
    p.add_argument("--traj", type=int, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="run CSV (n, mean_y, stderr)")
    p.add_argument("--plot", help="render the displacement curve to this file")
    p.set_defaults(func=cmd_zd_sim)

    p = sub.add_parser("fit", help="power-law fit of a run CSV")
    p.add_argument("run")
    p.add_argument("--grid-lo", type=float, default=0.50)
    p.add_argument("--grid-hi", type=float, default=1.00)
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--window-lo", type=float)
    p.add_argument("--window-hi", type=float)
    p.add_argument("--plot", help="render curve and objective profile to this file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("criteria", help="ballisticity, zero-speed and lattice verdicts")
    p.add_argument("spec")
    p.add_argument("--moment", type=float, default=1.0, help="moment for the lattice verdict")
    p.add_argument("--out")
    p.set_defaults(func=cmd_criteria)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
