"""Command-line front end: solve, game, verify, and sweep pipelines.

Every run is determined by one JSON config (plus optional seed/out
overrides); outputs are delimited files and JSON summaries, with figures
rendered alongside them.  Exit codes: 0 ok, 1 check failure, 2
non-convergence, 3 missing dependency artifact, 4 invalid config.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import report
from .config import ConfigError, RunConfig, interior_probe_points, load_config
from .game import (
    STATUS_NAMES,
    GameStatus,
    Strategy,
    estimate_value,
    exit_time_stats,
    play,
)
from .solver import load_solution_fields, solve, write_solution
from .verify import (
    check_lipschitz_bounds,
    check_max_principle,
    check_operator_monotone,
    check_supermartingale,
    check_uniqueness_bracket,
    compare_analytic,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_NO_CONVERGENCE = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_INVALID_CONFIG = 4


def _json_default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _dump_json(data, path) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, default=_json_default)
        fh.write("\n")


def _say(cfg: RunConfig, message: str) -> None:
    if not cfg.quiet:
        print(message)


def cmd_solve(cfg: RunConfig) -> int:
    problem = cfg.build_problem()
    solution = solve(problem, tol=cfg.tol, max_iter=cfg.max_iter)
    outdir = Path(cfg.out_dir)
    summary = write_solution(solution, problem, outdir)
    summary["config"] = cfg.to_dict()
    summary["seed"] = cfg.seed
    _dump_json(summary, outdir / "solve_summary.json")
    if cfg.figures:
        report.save_solution_figure(solution.lower, solution.upper,
                                    outdir / "solve_fields.png")
    _say(cfg, f"gap = {solution.gap:.6e} (tolerance {solution.gap_tol:.1e})")
    _say(cfg, f"residuals: lower {solution.residual_lower:.6e}, "
              f"upper {solution.residual_upper:.6e}")
    _say(cfg, f"iterations: lower {solution.iterations_lower}, "
              f"upper {solution.iterations_upper}")
    if not solution.converged:
        _say(cfg, "did not converge within max_iter")
        return EXIT_NO_CONVERGENCE
    if not solution.ok:
        _say(cfg, f"gap certificate failed at node {solution.gap_witness}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _build_strategy(spec, lower, upper) -> Strategy:
    if spec.kind == "greedy_max":
        return Strategy.greedy_max(lower if spec.field == "lower" else upper)
    if spec.kind == "greedy_min":
        return Strategy.greedy_min(lower if spec.field == "lower" else upper)
    if spec.kind == "pull_toward":
        return Strategy.pull_toward(spec.target)
    return Strategy.uniform_random()


def _solution_matches(summary: dict, cfg: RunConfig) -> bool:
    keys = {"p": cfg.p, "alpha_zero": cfg.alpha_zero, "n": cfg.n,
            "epsilon": cfg.epsilon, "M": cfg.M, "K": cfg.K}
    for key, want in keys.items():
        have = summary.get(key)
        if want is None:
            continue
        if have != want:
            return False
    return True


def cmd_game(cfg: RunConfig) -> int:
    problem = cfg.build_problem()
    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    needs_fields = any(s.kind in ("greedy_max", "greedy_min")
                       for s in (cfg.strategy_I, cfg.strategy_II))
    lower = upper = None
    if needs_fields:
        try:
            lower, upper, summary = load_solution_fields(outdir)
        except FileNotFoundError:
            _say(cfg, "greedy strategies need solved fields; run solve first")
            return EXIT_MISSING_ARTIFACT
        if not _solution_matches(summary, cfg):
            _say(cfg, "solved fields in the output directory do not match this config")
            return EXIT_MISSING_ARTIFACT
    S_I = _build_strategy(cfg.strategy_I, lower, upper)
    S_II = _build_strategy(cfg.strategy_II, lower, upper)

    entries = []
    all_ok = True
    for pt in cfg.start_points:
        est = estimate_value(pt, S_I, S_II, problem, cfg.N, cfg.seed,
                             cap=cfg.cap, workers=cfg.workers)
        entry = {"point": list(pt), "mean": est.mean, "std_error": est.std_error,
                 "ci95": est.ci95, "n_runs": est.n_runs,
                 "n_truncated": est.n_truncated,
                 "truncation_fraction": est.truncation_fraction, "ok": est.ok}
        if lower is not None:
            entry["solver_value"] = float(lower.sample_batch(
                np.asarray(pt, dtype=np.float64)[None, :])[0])
        entries.append(entry)
        all_ok = all_ok and est.ok
        _say(cfg, f"x0={pt}: mean {est.mean:.6g} +- {est.ci95:.2g} "
                  f"(truncated {est.n_truncated}/{est.n_runs})")

    survival = exit_time_stats(cfg.start_points[0], S_I, S_II, problem, cfg.N,
                               cfg.seed, cap=cfg.cap, workers=cfg.workers)
    payload = {"estimates": entries,
               "exit_times": {"j_tilde": survival.j_tilde,
                              "blocks": survival.blocks,
                              "survival": survival.survival,
                              "theta_hat": survival.theta_hat,
                              "n_truncated": survival.n_truncated},
               "config": cfg.to_dict(), "seed": cfg.seed}
    _dump_json(payload, outdir / "game_estimates.json")
    if cfg.record_trajectories > 0:
        _dump_trajectories(cfg, problem, S_I, S_II, outdir / "trajectories.jsonl")
    if cfg.figures:
        report.save_game_figure(entries, outdir / "game_values.png")
        report.save_survival_figure(survival, outdir / "game_survival.png")
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def _dump_trajectories(cfg: RunConfig, problem, S_I, S_II, path) -> None:
    with open(path, "w") as fh:
        for run in range(cfg.record_trajectories):
            traj = play(cfg.start_points[0], S_I, S_II, problem, cfg.seed,
                        cap=cfg.cap, run_index=run)
            for t in range(traj.turns):
                record = {"run": run, "turn": t + 1,
                          "x": [float(c) for c in traj.positions[t + 1]],
                          "coin": traj.coins[t], "move_kind": traj.move_kinds[t],
                          "status": STATUS_NAMES[GameStatus.RUNNING]
                          if t + 1 < traj.turns or traj.truncated
                          else STATUS_NAMES[traj.status]}
                fh.write(json.dumps(record) + "\n")


def cmd_verify(cfg: RunConfig) -> int:
    problem = cfg.build_problem()
    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    solution = solve(problem, tol=cfg.tol, max_iter=cfg.max_iter)
    if not solution.converged:
        _say(cfg, "verification needs a converged solve")
        return EXIT_NO_CONVERGENCE

    points = cfg.verify_points or interior_probe_points(cfg)
    reports = [
        check_max_principle(solution, problem.boundary, problem),
        check_operator_monotone(problem, cfg.verify_trials, cfg.seed),
        check_lipschitz_bounds(problem, min(cfg.verify_trials, 25), cfg.seed),
        check_uniqueness_bracket(problem, solution, points, cfg.verify_N,
                                 cfg.seed, cap=cfg.cap, workers=cfg.workers),
        check_supermartingale(problem, solution.lower, points[0],
                              Strategy.greedy_max(solution.lower), cfg.verify_N,
                              cfg.seed, cap=cfg.cap, workers=cfg.workers),
    ]
    if cfg.negative_controls:
        corrupted_vals = solution.lower.values.copy()
        lo, hi = float(np.nanmin(corrupted_vals)), float(np.nanmax(corrupted_vals))
        inside = np.where(solution.lower.region != 3)[0]
        corrupted_vals[inside[len(inside) // 2]] = hi + 1.0 + (hi - lo)
        corrupted = solution.lower.with_values(corrupted_vals)
        control = check_max_principle(
            _with_lower(solution, corrupted), problem.boundary, problem)
        control.check = "max_principle_negative_control"
        reports.append(control)

    table = None
    if problem.boundary.family in ("affine", "radial_pharmonic"):
        table = compare_analytic(solution, problem.boundary)

    payload = {"checks": [r.to_dict() for r in reports],
               "analytic_comparison": table.to_dict() if table else None,
               "config": cfg.to_dict(), "seed": cfg.seed}
    _dump_json(payload, outdir / "checks.json")
    failed = [r for r in reports if not r.passed and not r.inconclusive]
    if table is not None and table.passed is False:
        failed.append(table)
    for r in reports:
        state = "inconclusive" if r.inconclusive else ("pass" if r.passed else "FAIL")
        _say(cfg, f"{r.check}: {state} (measured {r.measured:.3e})")
    return EXIT_OK if not failed else EXIT_CHECK_FAILED


def _with_lower(solution, lower_field):
    import copy

    out = copy.copy(solution)
    out.lower = lower_field
    return out


def cmd_sweep(cfg: RunConfig) -> int:
    if not cfg.sweep_values:
        raise ConfigError("sweep.values: must be a nonempty list")
    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    all_ok = True
    for value in cfg.sweep_values:
        row = {"axis": cfg.sweep_axis, "value": value, "gap": None,
               "residual": None, "l_inf_vs_reference": None, "converged": False}
        try:
            kwargs = {cfg.sweep_axis: value}
            problem = cfg.build_problem(**kwargs)
            solution = solve(problem, tol=cfg.tol, max_iter=cfg.max_iter)
            row["gap"] = solution.gap
            row["residual"] = max(solution.residual_lower, solution.residual_upper)
            row["converged"] = solution.converged
            if problem.boundary.family in ("affine", "radial_pharmonic"):
                row["l_inf_vs_reference"] = compare_analytic(solution,
                                                             problem.boundary).l_inf
            ok = solution.converged and solution.ok
        except ConfigError as err:
            row["error"] = str(err)
            ok = False
        all_ok = all_ok and ok
        rows.append(row)
        _say(cfg, f"{cfg.sweep_axis}={value}: gap={row['gap']}, "
                  f"residual={row['residual']}, converged={row['converged']}")

    with open(outdir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "gap", "residual",
                         "l_inf_vs_reference", "converged"])
        for row in rows:
            writer.writerow([
                row["axis"],
                f"{row['value']:.17g}",
                "" if row["gap"] is None else f"{row['gap']:.17g}",
                "" if row["residual"] is None else f"{row['residual']:.17g}",
                "" if row["l_inf_vs_reference"] is None
                else f"{row['l_inf_vs_reference']:.17g}",
                int(bool(row["converged"])),
            ])
    _dump_json({"rows": rows, "config": cfg.to_dict(), "seed": cfg.seed},
               outdir / "sweep_summary.json")
    if cfg.figures:
        complete = [r for r in rows if r["gap"] is not None]
        report.save_sweep_figure(complete, cfg.sweep_axis, outdir / "sweep.png")
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthotug",
        description="Tug-of-war with orthogonal noise: solve the dynamic "
                    "programming equation, simulate the game, verify the theory.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("solve", "two-sided monotone value iteration"),
                            ("game", "Monte Carlo playouts and value estimates"),
                            ("verify", "run the structural checks"),
                            ("sweep", "one solve per value of a numerics axis")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument("--out", default=None, help="output directory override")
        cmd.add_argument("--seed", type=int, default=None, help="seed override")
        cmd.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed: must be nonnegative")
            cfg.seed = args.seed
        if args.quiet:
            cfg.quiet = True
        handler = {"solve": cmd_solve, "game": cmd_game,
                   "verify": cmd_verify, "sweep": cmd_sweep}[args.command]
        return handler(cfg)
    except ConfigError as err:
        print(f"invalid config: {err}", file=sys.stderr)
        return EXIT_INVALID_CONFIG


if __name__ == "__main__":
    sys.exit(main())
