"""Command-line front end.

Subcommands wire the pieces into reproducible runs: `run` streams verdicts,
`generate` writes a seeded synthetic corpus, the sweep/heatmap/baseline/
noise-exp commands write report files, and `snapshot-save`/`snapshot-load`
persist and resume engine state. Every output file starts with a header
carrying the version, the config fingerprint, and the seed.

Exit codes: 0 success, 2 configuration or usage error, 3 I/O error,
4 input format error, 5 internal state error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict
from itertools import islice
from typing import Iterator, Sequence, TextIO

from . import __version__
from .engine import DEFAULT_OMEGA, DEFAULT_TAU, EngineConfig, SpamRankEngine
from .errors import (
    ConfigError,
    FormatError,
    InternalStateError,
    InvalidAddressError,
    SpamRankError,
)
from .evaluation import (
    bin_heatmap,
    noise_correction_experiment,
    omega_sweep,
    sender_history_baseline,
    tau_sweep,
    write_heatmap,
    write_report,
    write_sweep,
)
from .ingest import (
    SENDER_DOMAIN,
    SENDER_FULL,
    MessageRecord,
    ParseStats,
    parse_stream,
    write_jsonl,
)
from .scoring import DEFERRED, LEGIT, SPAM, Verdict
from .snapshot import load_snapshot, save_snapshot
from .synthgen import WorkloadSpec, flip_labels, generate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_STATE = 5


def parse_grid(text: str) -> list[float]:
    """Grid syntax: 'start:stop:step' (inclusive ends) or 'v1,v2,...'."""
    try:
        if ":" in text:
            start_s, stop_s, step_s = text.split(":")
            start, stop, step = float(start_s), float(stop_s), float(step_s)
            if step <= 0:
                raise ValueError("step must be positive")
            n = int((stop - start) / step + 1e-9) + 1
            if n < 1:
                raise ValueError("empty range")
            # round away accumulated float noise so grids print cleanly
            return [round(start + k * step, 10) for k in range(n)]
        values = [float(v) for v in text.split(",") if v.strip()]
        if not values:
            raise ValueError("no grid points")
        return values
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc


# -- plumbing -----------------------------------------------------------------


@contextmanager
def _open_in(path: str):
    if path == "-":
        yield sys.stdin
    else:
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            yield fh


@contextmanager
def _open_out(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _engine_config(args: argparse.Namespace, base: EngineConfig | None = None) -> EngineConfig:
    """Fold explicit flags over a base config (defaults, or a snapshot's)."""
    if base is None:
        base = EngineConfig()

    def pick(v, dflt):
        return dflt if v is None else v

    return EngineConfig(
        tau=pick(args.tau, base.tau),
        omega=pick(args.omega, base.omega),
        sender_identity=pick(args.sender_identity, base.sender_identity),
        assign_before_update=pick(args.assign_before_update, base.assign_before_update),
        score_before_update=pick(args.score_before_update, base.score_before_update),
    )


def _header(cfg: EngineConfig, seed: int) -> dict:
    return {"spamrank": __version__, "fingerprint": cfg.fingerprint(), "seed": seed}


def _read_all(args: argparse.Namespace, cfg: EngineConfig) -> tuple[list[MessageRecord], ParseStats]:
    stats = ParseStats()
    with _open_in(args.input) as fh:
        records = list(parse_stream(fh, args.format, cfg.sender_identity, stats))
    return records, stats


def _verdict_obj(v: Verdict) -> dict:
    return {
        "id": v.msg_id,
        "p_s": v.p_s,
        "p_r": v.p_r,
        "sr": v.spam_rank,
        "decision": v.decision,
        "aux": v.aux_label,
        "effective": v.effective_label,
    }


def _print_summary(
    verdicts: Sequence[Verdict], stats: ParseStats, elapsed: float
) -> None:
    n = len(verdicts)
    spam = sum(1 for v in verdicts if v.decision == SPAM)
    legit = sum(1 for v in verdicts if v.decision == LEGIT)
    deferred = n - spam - legit
    classified = spam + legit
    agree = sum(
        1
        for v in verdicts
        if v.decision != DEFERRED and v.effective_label == v.aux_label
    )
    accordance = 100.0 * agree / classified if classified else 100.0
    throughput = n / elapsed if elapsed > 0 else 0.0
    print(
        f"messages={n} spam={spam} legit={legit} deferred={deferred} "
        f"accordance={accordance:.2f} classified={classified} "
        f"skipped_lines={stats.skipped} throughput={throughput:.0f} msg/s",
        file=sys.stderr,
    )


# -- commands -----------------------------------------------------------------


def _run_impl(args: argparse.Namespace, discard_output: bool) -> int:
    if args.snapshot_in:
        engine = load_snapshot(args.snapshot_in)
        cfg = _engine_config(args, engine.config)
        if cfg.fingerprint() != engine.config.fingerprint():
            raise ConfigError(
                "flags conflict with the snapshot's structural settings "
                f"({engine.config.fingerprint()})"
            )
        engine.config = cfg
    else:
        cfg = _engine_config(args)
        engine = SpamRankEngine(cfg)

    stats = ParseStats()
    verdicts: list[Verdict] = []
    start = time.perf_counter()
    with _open_in(args.input) as fh:
        records: Iterator[MessageRecord] = parse_stream(
            fh, args.format, cfg.sender_identity, stats
        )
        stop = args.skip + args.limit if args.limit is not None else None
        for record in islice(records, args.skip, stop):
            verdicts.append(engine.process(record))
    elapsed = time.perf_counter() - start

    if not discard_output or args.output is not None:
        with _open_out(args.output) as out:
            out.write(json.dumps({"header": _header(cfg, args.seed)}, sort_keys=True) + "\n")
            for v in verdicts:
                out.write(json.dumps(_verdict_obj(v)) + "\n")
    if args.snapshot_out:
        save_snapshot(engine, args.snapshot_out)
    _print_summary(verdicts, stats, elapsed)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    return _run_impl(args, discard_output=False)


def cmd_snapshot_save(args: argparse.Namespace) -> int:
    """Process input (optionally bounded by --limit) and persist the state."""
    if not args.snapshot_out:
        raise ConfigError("snapshot-save requires --snapshot-out")
    return _run_impl(args, discard_output=True)


def cmd_snapshot_load(args: argparse.Namespace) -> int:
    """Resume from --snapshot-in, typically with --skip for processed lines."""
    if not args.snapshot_in:
        raise ConfigError("snapshot-load requires --snapshot-in")
    return _run_impl(args, discard_output=False)


def cmd_generate(args: argparse.Namespace) -> int:
    spec = WorkloadSpec(
        seed=args.seed,
        n_messages=args.messages,
        n_legit_senders=args.legit_senders,
        n_spam_senders=args.spam_senders,
        n_recipients=args.recipients,
        n_communities=args.communities,
        community_size_mean=args.community_size,
        n_distribution_lists=args.lists,
        list_size_mean=args.list_size,
        spam_fraction=args.spam_fraction,
        legit_recipients_mean=args.legit_fanout,
        spam_recipients_mean=args.spam_fanout,
        sender_churn_rate=args.churn,
    )
    records = generate(spec)
    if args.flip_rate > 0.0:
        records = flip_labels(records, args.flip_rate, spec.seed)
    header = {"spamrank": __version__, "seed": spec.seed,
              "spec": asdict(spec), "flip_rate": args.flip_rate}
    n = write_jsonl(args.output, records, header)
    print(f"wrote {n} messages to {args.output}", file=sys.stderr)
    return EXIT_OK


def _sweep_command(args: argparse.Namespace, parameter: str) -> int:
    cfg = _engine_config(args)
    records, _ = _read_all(args, cfg)
    grid = parse_grid(args.grid)
    if parameter == "tau":
        result = tau_sweep(records, grid, cfg)
    else:
        result = omega_sweep(records, grid, cfg, naive=args.naive)
    header = _header(cfg, args.seed)
    prefix = args.output
    write_sweep(result, f"{prefix}.tsv", f"{prefix}.jsonl", header)
    print(f"wrote {prefix}.tsv and {prefix}.jsonl ({len(grid)} grid points)",
          file=sys.stderr)
    return EXIT_OK


def cmd_sweep_tau(args: argparse.Namespace) -> int:
    return _sweep_command(args, "tau")


def cmd_sweep_omega(args: argparse.Namespace) -> int:
    return _sweep_command(args, "omega")


def cmd_heatmap(args: argparse.Namespace) -> int:
    cfg = _engine_config(args)
    records, _ = _read_all(args, cfg)
    engine = SpamRankEngine(cfg)
    verdicts = [engine.process(r) for r in records]
    grid = bin_heatmap(verdicts, args.bin_size)
    header = _header(cfg, args.seed)
    prefix = args.output
    write_heatmap(grid, f"{prefix}.messages.tsv", f"{prefix}.spam.tsv",
                  f"{prefix}.jsonl", header)
    print(f"wrote {prefix}.messages.tsv, {prefix}.spam.tsv, {prefix}.jsonl",
          file=sys.stderr)
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    cfg = _engine_config(args)
    records, _ = _read_all(args, cfg)
    report = sender_history_baseline(records)
    prefix = args.output
    write_report(report, f"{prefix}.tsv", f"{prefix}.jsonl", _header(cfg, args.seed))
    print(
        f"baseline accordance={report.accordance_pct:.2f} "
        f"classified={report.classified_count}/{report.total_messages}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_noise_exp(args: argparse.Namespace) -> int:
    cfg = _engine_config(args)
    records, _ = _read_all(args, cfg)
    report = noise_correction_experiment(
        records, args.flip_rate, cfg.tau, cfg.omega, args.seed
    )
    prefix = args.output
    write_report(report, f"{prefix}.tsv", f"{prefix}.jsonl", _header(cfg, args.seed))
    print(
        f"aux_error={report.aux_error_rate:.4f} "
        f"engine_error={report.engine_error_rate:.4f} "
        f"fp_corrected={report.fp_corrected} fp_introduced={report.fp_introduced}",
        file=sys.stderr,
    )
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, default=None,
                   help=f"cluster join threshold (default {DEFAULT_TAU})")
    p.add_argument("--omega", type=float, default=None,
                   help=f"decision threshold (default {DEFAULT_OMEGA})")
    p.add_argument("--sender-identity", choices=[SENDER_DOMAIN, SENDER_FULL],
                   default=None, help="sender identity granularity")
    p.add_argument("--assign-before-update", action="store_true", default=None,
                   help="re-assign clusters before applying the message's edges")
    p.add_argument("--score-before-update", action="store_true", default=None,
                   help="read probabilities before recording the aux label")


def _add_io_flags(p: argparse.ArgumentParser, output_help: str) -> None:
    p.add_argument("--input", default="-", help="input path, '-' for stdin")
    p.add_argument("--format", choices=["jsonl", "tsv"], default="jsonl")
    p.add_argument("--output", default=None, help=output_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spamrank",
        description="Structural spam re-classification over mail logs",
    )
    parser.add_argument("--version", action="version",
                        version=f"spamrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=42,
                       help="seed recorded in output headers (default 42)")
        return p

    for name, func, help_ in (
        ("run", cmd_run, "stream verdicts for a message log"),
        ("snapshot-save", cmd_snapshot_save, "process input and save engine state"),
        ("snapshot-load", cmd_snapshot_load, "resume from a saved engine state"),
    ):
        p = add(name, func, help_)
        _add_engine_flags(p)
        _add_io_flags(p, "verdict jsonl path, '-'/default for stdout")
        p.add_argument("--skip", type=int, default=0,
                       help="skip this many leading records")
        p.add_argument("--limit", type=int, default=None,
                       help="process at most this many records")
        p.add_argument("--snapshot-in", default=None, help="state file to resume from")
        p.add_argument("--snapshot-out", default=None, help="state file to write at end")

    p = add("generate", cmd_generate, "write a seeded synthetic corpus")
    dflt = WorkloadSpec()
    p.add_argument("--output", required=True, help="corpus jsonl path")
    p.add_argument("--messages", type=int, default=dflt.n_messages)
    p.add_argument("--legit-senders", type=int, default=dflt.n_legit_senders)
    p.add_argument("--spam-senders", type=int, default=dflt.n_spam_senders)
    p.add_argument("--recipients", type=int, default=dflt.n_recipients)
    p.add_argument("--communities", type=int, default=dflt.n_communities)
    p.add_argument("--community-size", type=float, default=dflt.community_size_mean)
    p.add_argument("--lists", type=int, default=dflt.n_distribution_lists)
    p.add_argument("--list-size", type=float, default=dflt.list_size_mean)
    p.add_argument("--spam-fraction", type=float, default=dflt.spam_fraction)
    p.add_argument("--legit-fanout", type=float, default=dflt.legit_recipients_mean)
    p.add_argument("--spam-fanout", type=float, default=dflt.spam_recipients_mean)
    p.add_argument("--churn", type=float, default=dflt.sender_churn_rate)
    p.add_argument("--flip-rate", type=float, default=0.0,
                   help="flip this fraction of aux labels away from truth")

    p = add("sweep-tau", cmd_sweep_tau, "replay the corpus across a tau grid")
    _add_engine_flags(p)
    _add_io_flags(p, "report path prefix (default tau_sweep)")
    p.add_argument("--grid", default="0:1:0.1")
    p.set_defaults(output="tau_sweep", naive=False)

    p = add("sweep-omega", cmd_sweep_omega, "evaluate decisions across an omega grid")
    _add_engine_flags(p)
    _add_io_flags(p, "report path prefix (default omega_sweep)")
    p.add_argument("--grid", default="0.5:1:0.05")
    p.add_argument("--naive", action="store_true",
                   help="replay per grid point instead of reusing one replay")
    p.set_defaults(output="omega_sweep")

    p = add("heatmap", cmd_heatmap, "bin verdicts over (Ps, Pr)")
    _add_engine_flags(p)
    _add_io_flags(p, "report path prefix (default heatmap)")
    p.add_argument("--bin-size", type=float, default=0.1)
    p.set_defaults(output="heatmap")

    p = add("baseline", cmd_baseline, "sender-history-only baseline accordance")
    _add_engine_flags(p)
    _add_io_flags(p, "report path prefix (default baseline)")
    p.set_defaults(output="baseline")

    p = add("noise-exp", cmd_noise_exp, "label-noise correction experiment")
    _add_engine_flags(p)
    _add_io_flags(p, "report path prefix (default noise_exp)")
    p.add_argument("--flip-rate", type=float, default=0.1)
    p.set_defaults(output="noise_exp")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"spamrank: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, InvalidAddressError) as exc:
        print(f"spamrank: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except InternalStateError as exc:
        print(f"spamrank: internal state error: {exc}", file=sys.stderr)
        return EXIT_STATE
    except SpamRankError as exc:
        print(f"spamrank: error: {exc}", file=sys.stderr)
        return EXIT_STATE
    except OSError as exc:
        print(f"spamrank: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
