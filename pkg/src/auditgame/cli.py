"""Command-line entry point: ``auditgame <command> ...``.

Exit codes: 0 success, 1 validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .adaptive import (
    InsensitivityError,
    expected_audits,
    minimize_misreport_incentive,
    solve_adaptive_budgeted,
    solve_adaptive_costly,
)
from .config import ConfigError, dump_game, dump_policy, load_game, load_plan, load_priors
from .game import InvalidGameError, random_game, validate_game
from .nonadaptive import succinct_search
from .online import logs_to_csv, run_online
from .oracle import GridSpec, GridTooLarge, grid_best
from .sweeps import fig1_csv, fig1_scan, plan_summary, rows_to_csv, run_sweep, witness_class


class ValidationFailure(Exception):
    pass


def fmt(x) -> str:
    return f"{float(x):.12g}"


def fmt_vec(v) -> str:
    return " ".join(fmt(x) for x in v)


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit(args, name: str, text: str, echo: bool = False):
    """Write ``text`` to ``--out/name`` if an output directory was given, else print it."""
    if args.out:
        write_atomic(Path(args.out) / name, text)
        if echo:
            sys.stdout.write(text)
    else:
        sys.stdout.write(text)


def _load_valid_game(path):
    game = load_game(path)
    problems = validate_game(game)
    if problems:
        raise ValidationFailure("\n".join(f"invalid game: {v}" for v in problems))
    return game


def cmd_solve(args):
    game = _load_valid_game(args.game)
    if not game.is_costly:
        raise ValidationFailure("solve needs a costly game (lam); use 'budget' for budgeted games")
    lines = [f"objective = {args.objective}", f"eps = {fmt(args.eps)}"]
    if args.adaptive:
        pol = solve_adaptive_costly(game, args.eps, args.objective)
        lines += [f"mode = adaptive", f"value = {fmt(pol.value)}",
                  f"p_star = {fmt_vec(pol.p_star)}", f"qhat_star = {fmt_vec(pol.qhat_star)}",
                  f"witness = ({pol.witness.iota},{pol.witness.kappa})"]
        text = "\n".join(lines) + "\n"
        _emit(args, "solve.txt", text, echo=True)
        if args.out:
            write_atomic(Path(args.out) / "policy.toml", dump_policy(pol))
        return 0
    res = succinct_search(game, args.objective, args.eps)
    lines += ["mode = nonadaptive", f"value = {fmt(res.value)}", f"critical = {res.critical}",
              f"p_star = {fmt_vec(res.p_star)}",
              f"witness = {witness_class(res.witness.Q)}"]
    _emit(args, "solve.txt", "\n".join(lines) + "\n", echo=True)
    return 0


def cmd_budget(args):
    game = _load_valid_game(args.game)
    if game.is_costly:
        raise ValidationFailure("budget needs a budgeted game (budget)")
    pol = solve_adaptive_budgeted(game, args.objective)
    lines = [f"objective = {args.objective}", f"branch = {pol.branch}",
             f"beta = {fmt(pol.diagnostics.beta)}", f"value = {fmt(pol.value)}",
             f"p_star = {fmt_vec(pol.p_star)}", f"qhat_star = {fmt_vec(pol.qhat_star)}",
             f"expected_audits = {fmt(expected_audits(game, pol.p_star, pol.witness))}"]
    if pol.bound is not None:
        lines.append(f"upper_bound = {fmt(pol.bound)}")
        if pol.value < pol.bound:
            lines.append("note = realized value is below the pooled-budget upper bound "
                         "because truthful top-type agents pay no penalty")
    if pol.branch == "fallback":
        lines.append("note = no feasible single-minded candidate; small-budget policy used")
    _emit(args, "budget.txt", "\n".join(lines) + "\n", echo=True)
    if args.out:
        write_atomic(Path(args.out) / "policy.toml", dump_policy(pol))
    return 0


def cmd_mi(args):
    game = load_game(args.game)
    qhat = np.array(args.qhat if args.qhat else game.q, dtype=float)
    if qhat.shape != (game.m,) or np.any(qhat < 0) or abs(qhat.sum() - 1) > 1e-9:
        raise ValidationFailure(f"qhat must be a distribution of length {game.m}")
    budget = args.budget
    if budget is None:
        if game.is_costly:
            raise ValidationFailure("give --budget or a budgeted game")
        budget = game.budget
    r = minimize_misreport_incentive(game, qhat, budget)
    text = (f"level = {fmt(r.level)}\np = {fmt_vec(r.p)}\neps_MI = {fmt(r.eps_mi)}\n")
    _emit(args, "mi.txt", text, echo=True)
    return 0


def cmd_online(args):
    game = _load_valid_game(args.game)
    priors = load_priors(args.priors, game.m)
    try:
        logs, report = run_online(game, priors, args.T, args.seed, objective=args.objective)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from None
    if args.out:
        write_atomic(Path(args.out) / "online_log.csv", logs_to_csv(logs))
        write_atomic(Path(args.out) / "regret.txt", report.to_text())
    sys.stdout.write(report.to_text())
    return 0


def cmd_sweep(args):
    plan = load_plan(args.plan)
    rows = run_sweep(plan, parallel=args.parallel)
    stem = Path(args.plan).stem
    csv_text = rows_to_csv(plan, rows)
    if args.out:
        write_atomic(Path(args.out) / f"{stem}.csv", csv_text)
        write_atomic(Path(args.out) / f"{stem}.summary.json", plan_summary(plan, rows))
        skipped = sum(r.skipped is not None for r in rows)
        print(f"rows = {len(rows)}\nskipped = {skipped}")
    else:
        sys.stdout.write(csv_text)
    return 0


def _oracle_row(job):
    label, game, eps, step, force = job
    try:
        grid = grid_best(game, "utility", GridSpec(step=step, force=force))
    except GridTooLarge as exc:
        return label, None, None, None, str(exc)
    res = succinct_search(game, "utility", eps)
    ok = res.value >= grid.value - 2 * game.n * eps - grid.slack - 1e-12
    return label, res.value, grid.value, grid.slack, "PASS" if ok else "FAIL"


def cmd_oracle_check(args):
    jobs = []
    if args.game:
        for path in args.game:
            jobs.append((str(path), _load_valid_game(path), args.eps, args.step, args.force_grid))
    else:
        rng = np.random.default_rng(args.seed)
        for j in range(args.count):
            g = random_game(rng, args.m)
            jobs.append((f"random-{j}", g, args.eps, args.step, args.force_grid))
            if args.out:
                write_atomic(Path(args.out) / f"random-{j}.toml", dump_game(g))
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as ex:
            rows = list(ex.map(_oracle_row, jobs))
    else:
        rows = [_oracle_row(j) for j in jobs]
    out = ["game,solver_value,grid_value,slack_advisory,verdict"]
    for label, sv, gv, sl, verdict in rows:
        cells = [fmt(x) if x is not None else "" for x in (sv, gv, sl)]
        out.append(",".join([label, *cells, verdict]))
    text = "\n".join(out) + "\n"
    _emit(args, "oracle_check.csv", text, echo=True)
    return 0 if all(r[4] == "PASS" for r in rows) else 1


def cmd_fig1(args):
    if args.step <= 0:
        raise ValidationFailure("step must be positive")
    _emit(args, "fig1_scan.csv", fig1_csv(fig1_scan(args.step)))
    return 0


def cmd_game(args):
    if args.file:
        game = load_game(args.file)
    else:
        game = random_game(np.random.default_rng(args.seed), args.random)
    problems = validate_game(game)
    for v in problems:
        print(f"invalid game: {v}", file=sys.stderr)
    flag = problems.insensitivity
    if not flag.holds:
        k, l = flag.violations[0]
        print(f"note: insensitivity violated at (k,l)=({k},{l})", file=sys.stderr)
    _emit(args, "game.toml", dump_game(game))
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="write outputs into DIR")
    common.add_argument("--objective", choices=("utility", "welfare"), default="utility")
    common.add_argument("--eps", type=float, default=1e-3)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--parallel", type=int, default=1, metavar="N")

    ap = argparse.ArgumentParser(prog="auditgame", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="optimal audit vector for a costly game")
    p.add_argument("game")
    p.add_argument("--adaptive", action="store_true", help="dictator policy (best equilibrium)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("budget", parents=[common], help="dictator policy under an audit budget")
    p.add_argument("game")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("mi", parents=[common], help="minimize the misreport incentive")
    p.add_argument("game")
    p.add_argument("--qhat", type=float, nargs="+")
    p.add_argument("--budget", type=float)
    p.set_defaults(func=cmd_mi)

    p = sub.add_parser("online", parents=[common], help="EXP3 over a prior sequence")
    p.add_argument("game")
    p.add_argument("priors")
    p.add_argument("-T", type=int, default=1024)
    p.set_defaults(func=cmd_online)

    p = sub.add_parser("sweep", parents=[common], help="run a sweep plan, emit CSV")
    p.add_argument("plan")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle-check", parents=[common], help="compare solver with grid search")
    p.add_argument("game", nargs="*")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("-m", type=int, default=3)
    p.add_argument("--step", type=float, default=1 / 256)
    p.add_argument("--force-grid", action="store_true")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("fig1", parents=[common], help="scan p1 on the two-type example")
    p.add_argument("--step", type=float, default=0.01)
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("game", parents=[common], help="validate and re-emit a game file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--file")
    src.add_argument("--random", type=int, metavar="M")
    p.set_defaults(func=cmd_game)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.parallel < 1:
        parser.error("--parallel must be >= 1")
    try:
        return args.func(args)
    except (ValidationFailure, ConfigError, InvalidGameError, InsensitivityError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
