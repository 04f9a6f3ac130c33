"""Command-line front end.

Subcommands: validate, simulate, perf, centrality, optimize, robust,
sweep. Every run that writes data files also writes a
``<command>_manifest.json`` describing inputs, parameters, and outputs.
Numeric CSV cells carry 17 significant digits so reruns with the same
manifest are byte-identical.

Exit codes: 0 success, 1 input error, 2 stability or feasibility
rejection, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import (
    ConvergenceError,
    InfeasibleError,
    SingularityError,
    UnstableSystemError,
    ValidationError,
)
from .network import assemble_system_matrix, load_network, network_to_document
from .optimize import (
    SWEEP_COLUMNS,
    OptimizationKind,
    OptimizationProblem,
    solve_optimal,
    solve_robust,
    sweep_budget,
)
from .performance import NoiseKind, NoiseModel, centrality, performance_closed_form
from .simulate import SimulationMode, TrajectoryConfig, random_initial_state, simulate
from .spectral import DEFAULT_EPSILON, check_stability

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """Argument errors must map to exit code 1, not argparse's 2."""

    def error(self, message):
        raise ValidationError(message)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, metavar="FILE",
                        help="network JSON file")
    common.add_argument("--out-dir", default=".", metavar="DIR",
                        help="directory for emitted files (default: current)")
    common.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON,
                        help="decay-rate threshold (default %(default)s)")
    common.add_argument("--tau", type=float, default=None,
                        help="override the delay from the network file")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for randomized initial conditions")

    parser = _Parser(prog="delaysis",
                     description="Delayed SIS network analysis and traffic restriction")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common],
                   help="check the spectral stability box and print margins")

    p = sub.add_parser("simulate", parents=[common],
                       help="integrate trajectories, one CSV per delay value")
    p.add_argument("--tau-list", default=None, metavar="T0,T1,...",
                   help="comma-separated delays (default: the network's tau)")
    p.add_argument("--t-end", type=float, default=50.0, help="horizon (default %(default)s)")
    p.add_argument("--dt", type=float, default=None,
                   help="step size (default: tau/40, or 0.02 when tau=0)")
    p.add_argument("--mode", default="nonlinear", help="nonlinear or linearized")
    p.add_argument("--p0", default=None, metavar="VALUE[,VALUE...]",
                   help="initial infection level: one shared value or one per node "
                        "(default: random per seed)")

    p = sub.add_parser("perf", parents=[common],
                       help="steady-state noise performance (JSON)")
    p.add_argument("--noise", default="model", help="noise kind: model or test")

    p = sub.add_parser("centrality", parents=[common],
                       help="ranked node centrality table (CSV)")
    p.add_argument("--noise", default="model", help="noise kind: model or test")

    for name in ("optimize", "robust"):
        p = sub.add_parser(name, parents=[common],
                           help=f"{name} traffic reallocation (result + network JSON)")
        p.add_argument("--budget", type=float, default=None,
                       help="total weight (default: the network's current total)")

    p = sub.add_parser("sweep", parents=[common],
                       help="optimal/robust reallocation across budgets (CSV)")
    p.add_argument("--budgets", required=True, metavar="C0,C1,...",
                   help="comma-separated budget values")
    return parser


def _parse_float_list(text: str, label: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"cannot parse {label} {text!r}") from exc
    if not values:
        raise ValidationError(f"{label} is empty")
    return values


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: str, header, rows, footer_lines=()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")
        for line in footer_lines:
            fh.write(line + "\n")


def _write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_manifest(args, parameters: dict, outputs: list[str], started: float) -> None:
    doc = {
        "command": args.command,
        "input_path": args.input,
        "parameters": parameters,
        "outputs": outputs,
        "tool_version": __version__,
        "wall_time_s": round(time.monotonic() - started, 6),
    }
    _write_json(os.path.join(args.out_dir, f"{args.command}_manifest.json"), doc)


def _load(args):
    net = load_network(args.input)
    tau = net.tau if args.tau is None else float(args.tau)
    if not (np.isfinite(tau) and tau >= 0):
        raise ValidationError(f"tau must be finite and nonnegative, got {tau}")
    return net, tau


def _require_stable(net, tau: float, epsilon: float) -> None:
    report = check_stability(assemble_system_matrix(net), tau, epsilon)
    if not report.stable:
        raise UnstableSystemError(
            f"network is outside the stability box (lambda range "
            f"[{report.lambda_min:.6g}, {report.lambda_max:.6g}], "
            f"epsilon={epsilon:g}, tau={tau:g})"
        )


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_validate(args) -> int:
    net, tau = _load(args)
    report = check_stability(assemble_system_matrix(net), tau, args.epsilon)
    print(f"nodes: {net.node_count}  edges: {net.edge_count}  "
          f"beta: {net.beta:g}  tau: {tau:g}")
    print(f"eigenvalue range: [{report.lambda_min:.10g}, {report.lambda_max:.10g}]")
    print(f"decay margin (-epsilon - lambda_max): {report.margin_upper:.10g}")
    if np.isfinite(report.delay_bound):
        print(f"delay bound (-pi/(2 tau)): {-report.delay_bound:.10g}  "
              f"margin: {report.margin_lower:.10g}")
    else:
        print("delay bound: none (tau = 0)")
    print(f"verdict: {'stable' if report.stable else 'unstable'}")
    return 0 if report.stable else 2


def _cmd_simulate(args) -> int:
    started = time.monotonic()
    net, tau_default = _load(args)
    taus = ([tau_default] if args.tau_list is None
            else _parse_float_list(args.tau_list, "--tau-list"))
    labels = [f"{t:g}" for t in taus]
    if len(set(labels)) != len(labels):
        raise ValidationError("duplicate values in --tau-list")
    mode = SimulationMode.parse(args.mode)
    if args.p0 is None:
        p0 = random_initial_state(net.node_count, args.seed)
    else:
        values = _parse_float_list(args.p0, "--p0")
        if len(values) == 1:
            p0 = np.full(net.node_count, values[0])
        elif len(values) == net.node_count:
            p0 = np.array(values)
        else:
            raise ValidationError(
                f"--p0 takes 1 or {net.node_count} values, got {len(values)}"
            )

    outputs = []
    for tau, label in zip(taus, labels):
        report = check_stability(assemble_system_matrix(net), tau, args.epsilon)
        dt = args.dt if args.dt is not None else (tau / 40.0 if tau > 0 else 0.02)
        traj = simulate(net.with_tau(tau), TrajectoryConfig(
            initial_state=p0, t_end=args.t_end, dt=dt, mode=mode))
        name = f"trajectory_tau{label}.csv"
        header = ["t"] + [f"p_{i + 1}" for i in range(net.node_count)] + ["p_bar"]
        rows = (
            [traj.times[k]] + list(traj.states[k]) + [traj.average_infection[k]]
            for k in range(traj.times.shape[0])
        )
        _write_csv(os.path.join(args.out_dir, name), header, rows)
        outputs.append(name)
        verdict = "stable" if report.stable else "unstable"
        print(f"tau={label} ({verdict}): peak p_bar {traj.peak_height:.6g} "
              f"at t={traj.peak_time:.6g}"
              f" ({traj.clamp_events} clamp events) -> {name}")

    _write_manifest(args, {
        "tau_list": taus, "t_end": args.t_end, "dt": args.dt,
        "seed": args.seed, "mode": mode.value, "p0": args.p0,
        "epsilon": args.epsilon,
    }, outputs, started)
    return 0


def _cmd_perf(args) -> int:
    started = time.monotonic()
    net, tau = _load(args)
    _require_stable(net, tau, args.epsilon)
    kind = NoiseKind.parse(args.noise)
    value = performance_closed_form(
        assemble_system_matrix(net), NoiseModel(kind, net.sigma), tau)
    doc = {
        "rho_ss": value.rho_ss,
        "per_mode": [float(x) for x in value.per_mode],
        "noise": kind.value,
        "tau": tau,
    }
    _write_json(os.path.join(args.out_dir, "perf.json"), doc)
    _write_manifest(args, {"tau": tau, "epsilon": args.epsilon, "noise": kind.value},
                    ["perf.json"], started)
    print(f"rho_ss = {value.rho_ss:.10g} ({kind.value} noise, tau={tau:g})")
    return 0


def _cmd_centrality(args) -> int:
    started = time.monotonic()
    net, tau = _load(args)
    _require_stable(net, tau, args.epsilon)
    kind = NoiseKind.parse(args.noise)
    M = assemble_system_matrix(net)
    vec = centrality(M, kind, tau)
    rho = performance_closed_form(M, NoiseModel(kind, net.sigma), tau).rho_ss
    contribution = vec.eta * net.sigma ** 2

    rows = []
    for rank, node in enumerate(vec.ranking(), start=1):
        rows.append((rank, int(node) + 1, float(vec.eta[node]),
                     float(net.sigma[node]), float(contribution[node])))
    footer = [
        f"# sum_eta_sigma_sq={contribution.sum():.17g}",
        f"# rho_ss={rho:.17g}",
    ]
    _write_csv(os.path.join(args.out_dir, "centrality.csv"),
               ["rank", "node", "eta", "sigma", "eta_sigma_sq"], rows, footer)
    _write_manifest(args, {"tau": tau, "epsilon": args.epsilon, "noise": kind.value},
                    ["centrality.csv"], started)
    print(f"top node: {int(vec.ranking()[0]) + 1} "
          f"(eta={vec.eta[vec.ranking()[0]]:.6g}); table -> centrality.csv")
    return 0


def _solve_command(args, kind: OptimizationKind) -> int:
    started = time.monotonic()
    net, tau = _load(args)
    if kind is OptimizationKind.OPTIMAL:
        prob = OptimizationProblem(net, kind=kind, budget=args.budget,
                                   epsilon=args.epsilon, tau=tau)
        result = solve_optimal(prob)
        prefix = "optimal"
    else:
        prob = OptimizationProblem(net, kind=kind, budget=args.budget,
                                   epsilon=args.epsilon, tau=tau)
        result = solve_robust(prob)
        prefix = "robust"

    result_name = f"{prefix}_result.json"
    network_name = f"{prefix}_network.json"
    _write_json(os.path.join(args.out_dir, result_name), result.as_document())
    tuned = net.with_weights(result.weights).with_tau(tau) if net.edge_count else net
    _require_stable(tuned, tau, args.epsilon)  # reallocation must stay in the box
    _write_json(os.path.join(args.out_dir, network_name),
                network_to_document(tuned))
    _write_manifest(args, {
        "tau": tau, "epsilon": args.epsilon, "budget": prob.budget,
        "kind": kind.value,
    }, [result_name, network_name], started)

    improvement = ("n/a" if result.improvement_pct is None
                   else f"{result.improvement_pct}%")
    print(f"{prefix}: objective {result.objective:.10g}, exact rho "
          f"{result.exact_rho if result.exact_rho is not None else float('nan'):.10g}, "
          f"improvement {improvement}, {result.iterations} iterations, "
          f"kkt {result.kkt_residual:.3g}")
    return 0


def _cmd_optimize(args) -> int:
    return _solve_command(args, OptimizationKind.OPTIMAL)


def _cmd_robust(args) -> int:
    return _solve_command(args, OptimizationKind.ROBUST)


def _cmd_sweep(args) -> int:
    started = time.monotonic()
    net, tau = _load(args)
    budgets = _parse_float_list(args.budgets, "--budgets")
    rows = sweep_budget(net, budgets, epsilon=args.epsilon, tau=tau)
    _write_csv(os.path.join(args.out_dir, "sweep.csv"), SWEEP_COLUMNS,
               (row.as_tuple() for row in rows))
    outputs = ["sweep.csv"]

    comparison = _weights_comparison(net, tau, args.epsilon, budgets)
    if comparison is not None:
        _write_csv(os.path.join(args.out_dir, "weights_comparison.csv"),
                   ["edge", "i", "j", "w_original", "w_optimal", "w_robust"],
                   comparison)
        outputs.append("weights_comparison.csv")

    _write_manifest(args, {"tau": tau, "epsilon": args.epsilon, "budgets": budgets},
                    outputs, started)
    feasible = sum(1 for r in rows if r.feasible)
    print(f"swept {len(rows)} budgets ({feasible} feasible) -> sweep.csv")
    return 0


def _weights_comparison(net, tau, epsilon, budgets):
    """Per-edge weights at the budget closest to the baseline total."""
    if net.edge_count == 0 or net.total_weight <= 0:
        return None
    for budget in sorted(budgets, key=lambda c: abs(c - net.total_weight)):
        try:
            res_opt = solve_optimal(OptimizationProblem(
                net, kind=OptimizationKind.OPTIMAL, budget=budget,
                epsilon=epsilon, tau=tau))
            res_rob = solve_robust(OptimizationProblem(
                net, kind=OptimizationKind.ROBUST, budget=budget,
                epsilon=epsilon, tau=tau))
        except (InfeasibleError, ConvergenceError):
            continue
        scaled = net.weights * (budget / net.total_weight)
        return [
            (e + 1, int(i) + 1, int(j) + 1, float(scaled[e]),
             float(res_opt.weights[e]), float(res_rob.weights[e]))
            for e, (i, j) in enumerate(net.edges)
        ]
    return None


_HANDLERS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "perf": _cmd_perf,
    "centrality": _cmd_centrality,
    "optimize": _cmd_optimize,
    "robust": _cmd_robust,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        os.makedirs(args.out_dir, exist_ok=True)
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UnstableSystemError, InfeasibleError, SingularityError) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
