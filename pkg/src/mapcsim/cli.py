"""Command-line entry points: run a match, exercise the assignment oracles, inspect logs.

Exit codes: 0 success, 2 bad input (config, matrix, missing step), 3 write failure.
Errors go to stderr, data to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .auction import assignment_total, greedy_assignment_oracle, optimal_assignment_oracle
from .errors import ConfigError, InputError, SizeError
from .sim import MatchConfig, StepRecord, read_log, run_match

EXIT_OK, EXIT_INPUT, EXIT_WRITE = 0, 2, 3


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# -- run ----------------------------------------------------------------------


def load_run_config(path: str | None, overrides: dict) -> tuple[MatchConfig, str | None]:
    """Config file values, then command-line overrides; returns the config and output path.

    The file is a JSON object holding any ``MatchConfig`` field plus an
    optional ``out`` path. Unknown keys are rejected by name.
    """
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    out = data.pop("out", None)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "out":
            out = value
        else:
            data[key] = value
    try:
        config = MatchConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return config, out


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config, out = load_run_config(args.config, {"seed": args.seed, "steps": args.steps, "out": args.out})
    except ConfigError as exc:
        raise _Fail(EXIT_INPUT, f"bad config: {exc}") from None
    log_net = bool(args.log_net)
    match = run_match(config, net_log=log_net)
    if out is not None:
        try:
            Path(out).write_text(match.dumps(), encoding="utf-8")
            if log_net:
                Path(str(out) + ".net").write_text("\n".join(match.net_lines()) + "\n", encoding="utf-8")
        except OSError as exc:
            raise _Fail(EXIT_WRITE, f"cannot write {out}: {exc.strerror}") from None
    totals = match.totals
    print(f"{totals['A']} {totals['B']} {match.winner}")
    return EXIT_OK


# -- oracle -------------------------------------------------------------------


def parse_matrix(text: str) -> list[list[int | None]]:
    """Utility matrix text: a line "A G", then A rows of G integers or ``x``."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise InputError('first line must be "A G"')
    try:
        n_agents, n_goals = int(lines[0][0]), int(lines[0][1])
    except ValueError:
        raise InputError('first line must be "A G"') from None
    if n_agents < 0 or n_goals < 0:
        raise InputError("matrix dimensions must be non-negative")
    rows = lines[1:]
    if len(rows) != n_agents:
        raise InputError(f"expected {n_agents} rows, found {len(rows)}")
    matrix = []
    for i, row in enumerate(rows, 1):
        if len(row) != n_goals:
            raise InputError(f"row {i} has {len(row)} entries, expected {n_goals}")
        parsed = []
        for cell in row:
            if cell == "x":
                parsed.append(None)
                continue
            try:
                parsed.append(int(cell))
            except ValueError:
                raise InputError(f"row {i}: bad entry {cell!r}") from None
        matrix.append(parsed)
    return matrix


def cmd_oracle(args: argparse.Namespace) -> int:
    try:
        matrix = parse_matrix(Path(args.matrix).read_text(encoding="utf-8"))
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"cannot read matrix {args.matrix}: {exc.strerror}") from None
    except InputError as exc:
        raise _Fail(EXIT_INPUT, f"malformed matrix: {exc}") from None
    greedy = greedy_assignment_oracle(matrix)
    for a, g in sorted(greedy.items()):
        print(f"agent {a + 1} -> goal {g + 1} ({matrix[a][g]})")
    total = assignment_total(matrix, greedy)
    print(f"greedy total {total}")
    if args.optimal:
        try:
            _, best = optimal_assignment_oracle(matrix)
        except SizeError as exc:
            raise _Fail(EXIT_INPUT, str(exc)) from None
        ratio = total / best if best else 1.0
        print(f"optimal total {best}")
        print(f"ratio {round(ratio, 4)}")
    return EXIT_OK


# -- dump ---------------------------------------------------------------------


def format_record(rec: StepRecord) -> str:
    lines = [f"step {rec.step}"]
    lines.append("  score      " + "  ".join(f"{t}={v}" for t, v in sorted(rec.score.items())))
    lines.append("  cumulative " + "  ".join(f"{t}={v}" for t, v in sorted(rec.cumulative.items())))
    lines.append("  colored    " + "  ".join(f"{t}={v}" for t, v in sorted(rec.colored.items())))
    if rec.disabled:
        lines.append("  disabled   " + " ".join(str(a) for a in rec.disabled))
    for aid, action, ok in rec.actions:
        status = "ok" if ok else "failed"
        lines.append(f"  agent {aid:>3} at {rec.positions.get(aid, '-'):>4}  {action:<12} {status}")
    return "\n".join(lines)


def cmd_dump(args: argparse.Namespace) -> int:
    try:
        _, records, _ = read_log(args.log)
    except (OSError, ValueError) as exc:
        raise _Fail(EXIT_INPUT, f"cannot read log {args.log}: {exc}") from None
    if args.scores:
        print("step scoreA scoreB")
        for rec in records:
            print(f"{rec.step} {rec.score['A']} {rec.score['B']}")
        return EXIT_OK
    for rec in records:
        if rec.step == args.step:
            print(format_record(rec))
            return EXIT_OK
    raise _Fail(EXIT_INPUT, f"log has no step {args.step}")


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapcsim", description="Two-team multi-agent graph contest simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="play one match and write its log",
                         description="Flags override values from the config file.")
    run.add_argument("--config", help="JSON object of match settings, plus an optional 'out' path")
    run.add_argument("--seed", type=int)
    run.add_argument("--steps", type=int)
    run.add_argument("--out", help="match log destination (JSON lines)")
    run.add_argument("--log-net", type=_bool, nargs="?", const=True, default=False,
                     help="also write channel events to OUT.net")
    run.set_defaults(func=cmd_run)

    oracle = sub.add_parser("oracle", help="run the assignment oracles on a utility matrix")
    osub = oracle.add_subparsers(dest="problem", required=True)
    assign = osub.add_parser("assignment")
    assign.add_argument("--matrix", required=True, help='text file: "A G" then A rows of G integers or x')
    assign.add_argument("--optimal", action="store_true", help="also compute the exact optimum and the ratio")
    assign.set_defaults(func=cmd_oracle)

    dump = sub.add_parser("dump", help="inspect a match log")
    dump.add_argument("--log", required=True)
    what = dump.add_mutually_exclusive_group(required=True)
    what.add_argument("--step", type=int, help="print one step record")
    what.add_argument("--scores", action="store_true", help="per-step score columns")
    dump.set_defaults(func=cmd_dump)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"mapcsim: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
