"""Command-line entry point: ``mangled-worlds <subcommand> [options]``.

Every subcommand writes one table, as CSV (default) or newline-delimited
JSON.  The first line is always a tag carrying the tool version and a digest
of the run's parameters, so equal parameters give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from contextlib import contextmanager
from typing import Iterable, Optional, Sequence

import numpy as np

from . import coherence_toy as toy
from .artifacts import TOOL_NAME, TOOL_VERSION, comment_line, config_digest, fmt
from .branching import binary_event, binomial_ensemble
from .dynamics import (
    CoherenceModel,
    PopulationSpec,
    coherence_at,
    log_relative_size,
    median_trajectory,
    rate_selection,
    sigma_trajectory,
)
from .errors import MangledWorldsError, UsageError
from .experiment import (
    COUNT_MODELS,
    DEFAULT_FREQUENCIES,
    FIGURE1_HEADER,
    ExperimentConfig,
    born_window,
    figure1_rows,
    frequency_line,
    joint_spec,
    line_crossing,
    unmangled_frequency_histogram,
)
from .lognormal import from_ensemble
from .mangling import SHAPES, TransitionRegion, outcome_shares
from .numerics import LN10

OUTDIR_ENV = "MANGLED_WORLDS_OUTDIR"

EPILOG = f"""\
exit status:
  0  success
  1  output could not be written
  2  usage error: bad flag, bad value, unknown config key
  3  numerical failure: quadrature, stability bound, missing crossing
  4  empty result: every world is mangled

Each subcommand accepts --config FILE with key=value lines (keys are flag
names without the leading dashes); flags given on the command line win.
Without --out, output goes to ${OUTDIR_ENV}/<subcommand>.<format> when that
variable is set, otherwise to stdout.
"""


class Table:
    def __init__(self, header: Sequence[str], rows: Iterable[Sequence]):
        self.header = list(header)
        self.rows = rows


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return fmt(float(x))
    return str(x)


def _json_value(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(fmt(x)) if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_table(fh, table: Table, digest: str, kind: str, output_format: str) -> int:
    n = 0
    if output_format == "csv":
        fh.write(comment_line(digest, kind))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_cell(x) for x in row])
            n += 1
    else:
        meta = {"tool": TOOL_NAME, "version": TOOL_VERSION, "config_digest": digest, "kind": kind,
                "columns": table.header}
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for row in table.rows:
            rec = {k: _json_value(v) for k, v in zip(table.header, row)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            n += 1
    return n


def _frequencies(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _experiment(args) -> ExperimentConfig:
    return ExperimentConfig(
        n_counted=args.n_counted,
        n_background=args.n_background,
        p=args.p,
        counted_frequencies=args.frequencies,
        background_p=args.background_p,
        count_model=args.count_model,
    )


def _cmd_figure1(args) -> Table:
    scale = 1.0 / LN10 if args.log10 else 1.0
    config = _experiment(args)
    rows = ((h, f, mp, s * scale, c * scale) for h, f, mp, s, c in figure1_rows(config, args.digest))
    return Table(FIGURE1_HEADER, rows)


def _cmd_crossings(args) -> Table:
    config = _experiment(args)
    x = line_crossing(frequency_line(config, args.f_a), frequency_line(config, args.f_b))
    return Table(["f_a", "f_b", "log_size", "log10_size"], [(args.f_a, args.f_b, x, x / LN10)])


def _cmd_born_window(args) -> Table:
    w = born_window(_experiment(args), (args.window_low, args.window_high))
    return Table(
        ["window_low", "window_high", "lower", "upper", "span_ln", "span_log10"],
        [(args.window_low, args.window_high, w.lower, w.upper, w.span_ln, w.span_log10)],
    )


def _cmd_histogram(args) -> Table:
    config = _experiment(args)
    if args.cutoff is not None:
        cutoff = args.cutoff
    elif args.cutoff_z is not None:
        cutoff = joint_spec(config).at_z(args.cutoff_z)
    else:
        raise UsageError("histogram needs --cutoff or --cutoff-z")
    h = unmangled_frequency_histogram(config, cutoff)
    scale = 1.0 / LN10 if args.log10 else 1.0
    return Table(["f", "log_unmangled_count", "share"], [(f, c * scale, s) for f, c, s in h.rows])


def _cmd_shares(args) -> Table:
    event = binary_event(args.p)
    background = binomial_ensemble(args.n_background, args.p if args.background_p is None else args.background_p)
    if args.cutoff is not None:
        region = TransitionRegion.around(args.cutoff, args.width, args.shape, args.scale)
    else:
        region = TransitionRegion.at_z(from_ensemble(background), args.z, args.width, args.shape, args.scale)
    rows = outcome_shares(event, background, region)
    return Table(
        ["outcome_label", "F", "G", "share", "born_weight", "deviation"],
        [(r.label, r.fraction, r.multiplicity, r.share, r.born_weight, r.deviation) for r in rows],
    )


def _cmd_dynamics(args) -> Table:
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    if not args.horizon > 0:
        raise UsageError("--horizon must be positive")
    slow = PopulationSpec.binary(args.p, args.rate_slow, math.log(0.5))
    fast = PopulationSpec.binary(args.p, args.rate_fast, math.log(0.5))
    model = CoherenceModel(args.coherence_initial, args.decay_rate, args.coherence_floor)
    t = np.linspace(0.0, args.horizon, args.points)
    shares = rate_selection(slow, fast, t, offset=args.offset)
    eps = np.atleast_1d(coherence_at(model, t))
    delta = np.exp(np.atleast_1d(log_relative_size(slow, t, args.z)))
    ln_median = np.atleast_1d(median_trajectory(slow, t))
    sigma = np.atleast_1d(sigma_trajectory(slow, t))
    rows = [
        (float(t[i]), float(ln_median[i]), float(sigma[i]), float(eps[i]), float(delta[i]), shares[i][1])
        for i in range(len(t))
    ]
    return Table(["t", "ln_median", "sigma", "epsilon", "delta", "share_slow"], rows)


def _cmd_toy(args) -> Table:
    if args.every < 1:
        raise UsageError("--every must be at least 1")
    state = toy.init_two_worlds(args.dl, args.ds, args.delta, args.epsilon, args.seed, rank=args.rank)
    H = toy.random_hamiltonian(args.dl, args.ds, args.seed + 1_000_003)

    def row(step, s):
        r = toy.influence_ratios(s, H)
        return step, s.trace_LL, s.trace_ss, s.offdiag_norm, r.large_world_ratio, r.small_world_ratio

    rows = [row(0, state)]
    for i, s in enumerate(toy.trajectory(state, H, args.dt, args.steps), start=1):
        if i % args.every == 0 or i == args.steps:
            rows.append(row(i, s))
    return Table(["step", "trace_LL", "trace_ss", "offdiag_norm", "ratio_L", "ratio_s"], rows)


def _cmd_enumerate(args) -> Table:
    ens = binomial_ensemble(args.n_events, args.p)
    rows = ((ens.label_of(i), float(ens.log_count[i]), float(ens.log_size[i])) for i in range(len(ens)))
    return Table(["label", "log_count", "log_size"], rows)


def _add_common(sp):
    sp.add_argument("--config", metavar="FILE", help="key=value file supplying defaults for any flag")
    sp.add_argument("--out", metavar="PATH", help="output file (default: see below)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--seed", type=int, default=0)


def _add_experiment(sp):
    sp.add_argument("--n-counted", type=int, default=100)
    sp.add_argument("--n-background", type=int, default=10_000)
    sp.add_argument("--p", type=float, default=0.7)
    sp.add_argument("--background-p", type=float, default=None)
    sp.add_argument("--frequencies", type=_frequencies, default=DEFAULT_FREQUENCIES,
                    help="comma-separated counted frequencies (default 0.5,0.55,...,0.9)")
    sp.add_argument("--count-model", choices=COUNT_MODELS, default="exact",
                    help="binomial counts: exact log-gamma or the normal approximation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="World-counting experiments on branching measure distributions.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text, epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=func)
        _add_common(sp)
        return sp

    sp = add("figure1", _cmd_figure1, "log count vs log size for the counted frequencies")
    _add_experiment(sp)
    sp.add_argument("--log10", action="store_true", help="report logs in base 10")

    sp = add("crossings", _cmd_crossings, "log size where two frequency lines carry equal counts")
    _add_experiment(sp)
    sp.add_argument("--f-a", type=float, default=0.7)
    sp.add_argument("--f-b", type=float, default=0.75)

    sp = add("born-window", _cmd_born_window, "span of cutoffs over which the Born line dominates")
    _add_experiment(sp)
    sp.add_argument("--window-low", type=float, default=0.65)
    sp.add_argument("--window-high", type=float, default=0.75)

    sp = add("histogram", _cmd_histogram, "unmangled worlds per counted frequency above a cutoff")
    _add_experiment(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--cutoff", type=float, help="step cutoff in ln size")
    g.add_argument("--cutoff-z", type=float, help="step cutoff in spreads above the joint median measure")
    sp.add_argument("--log10", action="store_true", help="report logs in base 10")

    sp = add("shares", _cmd_shares, "outcome shares of unmangled worlds for a binary event")
    sp.add_argument("--p", type=float, default=0.7)
    sp.add_argument("--n-background", type=int, default=10_000)
    sp.add_argument("--background-p", type=float, default=None)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--z", type=float, default=0.0, help="region centre in spreads above the median measure")
    g.add_argument("--cutoff", type=float, default=None, help="region centre in ln size")
    sp.add_argument("--width", type=float, default=0.0)
    sp.add_argument("--shape", choices=SHAPES, default="step")
    sp.add_argument("--scale", type=float, default=None)

    sp = add("dynamics", _cmd_dynamics, "median decay, spread growth, coherence and rate selection over time")
    sp.add_argument("--rate-slow", type=float, default=1.0)
    sp.add_argument("--rate-fast", type=float, default=2.0)
    sp.add_argument("--p", type=float, default=0.7)
    sp.add_argument("--coherence-initial", type=float, default=0.5)
    sp.add_argument("--decay-rate", type=float, default=1.0)
    sp.add_argument("--coherence-floor", type=float, default=1e-20)
    sp.add_argument("--z", type=float, default=-1.0, help="z-score of the small world tracked by delta")
    sp.add_argument("--horizon", type=float, default=1e4)
    sp.add_argument("--points", type=int, default=101)
    sp.add_argument("--offset", type=float, default=0.0, help="cutoff offset from the combined median, ln units")

    sp = add("toy-coherence", _cmd_toy, "two-world block density matrix under a random Hamiltonian")
    sp.add_argument("--dl", type=int, default=4)
    sp.add_argument("--ds", type=int, default=4)
    sp.add_argument("--delta", type=float, default=1e-3)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--rank", type=int, default=1, help="rank of the random diagonal blocks")
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--steps", type=int, default=1000)
    sp.add_argument("--every", type=int, default=10, help="record every this many steps")

    sp = add("enumerate", _cmd_enumerate, "exact frequency classes of N binary events")
    sp.add_argument("--n-events", type=int, default=100)
    sp.add_argument("--p", type=float, default=0.7)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def config_to_argv(sp: argparse.ArgumentParser, path: str) -> list[str]:
    """Turn a key=value file into flags for ``sp``; unknown keys are rejected."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    argv = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        flag = "--" + key.strip().replace("_", "-")
        value = value.strip()
        action = sp._option_string_actions.get(flag)
        if action is None or flag in ("--config", "--help"):
            raise UsageError(f"{path}:{lineno}: unknown key {key.strip()!r}")
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"{path}:{lineno}: {key.strip()} expects true or false")
        else:
            argv += [flag, value]
    return argv


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config:
        sub = args.subcommand
        rest = argv[argv.index(sub) + 1:]
        args = parser.parse_args([sub] + config_to_argv(_subparser(parser, sub), args.config) + rest)
    params = {k: v for k, v in vars(args).items() if k not in ("config", "out", "format", "func")}
    args.digest = config_digest(params)
    return args


@contextmanager
def _sink(args):
    path = args.out
    if path is None and os.environ.get(OUTDIR_ENV):
        path = os.path.join(os.environ[OUTDIR_ENV], f"{args.subcommand}.{args.format}")
    if path is None:
        yield sys.stdout
        return
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        yield fh


def _diagnose(status: int, exc: BaseException) -> int:
    msg = " ".join(str(exc).split())
    print(f"{TOOL_NAME}: error status={status} kind={type(exc).__name__} message={msg}", file=sys.stderr)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except MangledWorldsError as exc:
        return _diagnose(exc.exit_code, exc)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        table = args.func(args)
        # materialise before opening the sink so a failure leaves no partial file
        table.rows = list(table.rows)
        with _sink(args) as fh:
            write_table(fh, table, args.digest, args.subcommand, args.format)
    except MangledWorldsError as exc:
        return _diagnose(exc.exit_code, exc)
    except ValueError as exc:
        return _diagnose(2, exc)
    except OSError as exc:
        return _diagnose(1, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
