"""Command-line entry point: ``rb422 <command> ...``.

Flags that mirror config keys (``--seed``, ``--sequences``, ``--shots``,
``--resamples``, ``--bit-order``) override the config file when given.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import code, groups
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import (ExperimentResult, analyze, read_results, records_from_list, refit, run_experiment,
                         write_results)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(seed=getattr(args, "seed", None),
                              sequences_per_length=getattr(args, "sequences", None),
                              shots=getattr(args, "shots", None),
                              bootstrap_resamples=getattr(args, "resamples", None),
                              bit_order=getattr(args, "bit_order", None))


def _print_estimates(result: ExperimentResult, out=None) -> None:
    out = out or sys.stdout
    print("platform\tanalysis\tb\tc\tinfidelity\tci_low\tci_high", file=out)
    for e in result.estimates:
        ci = ("-", "-") if e["ci_low"] is None else (f"{e['ci_low']:.6f}", f"{e['ci_high']:.6f}")
        print(f"{e['platform']}\t{e['analysis']}\t{e['b']:.6f}\t{e['c']:.6f}\t{e['infidelity']:.6f}\t"
              f"{ci[0]}\t{ci[1]}", file=out)
    for f in result.fits:
        if "error" in f:
            print(f"{f['platform']}\t{f['analysis']}\tfit failed: {f['error']}", file=out)


def cmd_verify(args) -> int:
    ok = True
    expected = {"R(2)": (groups.realizable_group, 576, 3.0), "C_R(2)": (groups.real_clifford_group, 1152, 3.0),
                "C(2)": (groups.clifford_group, 11520, 2.0)}
    for name, (build, order, fp) in expected.items():
        cat = build()
        pot = groups.frame_potential(cat)
        good = len(cat) == order and abs(pot - fp) < 1e-9
        ok &= good
        print(f"{name}\torder {len(cat)}\tframe potential {pot:.12f}\tmean word length "
              f"{cat.mean_word_length():.4f}\t{'ok' if good else 'FAIL'}")
    for row in code.verify_gate_table():
        ok &= row.passed
        print(f"gate {row.row.physical} -> {row.row.logical}\tdeviation {row.max_deviation:.2e}\t{'ok' if row.passed else 'FAIL'}")
    return 0 if ok else 1


def cmd_run(args) -> int:
    cfg = _load(args)
    out = args.out or cfg.output.get("results") or "results.jsonl"
    progress = None
    if args.verbose:
        def progress(rt, m):
            print(f"{rt} m={m}", file=sys.stderr)
    result = run_experiment(cfg, out, progress)
    _print_estimates(result)
    plot_dir = args.plot_dir or cfg.output.get("plot_dir")
    if plot_dir:
        from .plotting import render_report

        render_report(result, plot_dir)
    print(f"wrote {out}")
    return 0


def cmd_fit(args) -> int:
    result = refit(read_results(args.results), resamples=0)
    _print_estimates(result)
    return 0


def cmd_bootstrap(args) -> int:
    stored = read_results(args.results)
    result = refit(stored, resamples=args.resamples, seed=args.seed)
    _print_estimates(result)
    if args.out:
        write_results(result, args.out)
    return 0


def cmd_export(args) -> int:
    from .qasm import export_qasm, simulate_exported

    cfg = _load(args)
    out = args.out or cfg.output.get("qasm_dir") or "qasm"
    entries = export_qasm(cfg, out)
    print(f"wrote {len(entries)} programs to {out}")
    if args.simulate:
        simulate_exported(out, cfg.model)
        print(f"wrote simulated counts to {out}")
    return 0


def cmd_ingest(args) -> int:
    from .qasm import ingest_counts

    cfg = _load(args)
    res = ingest_counts(args.counts, args.manifest, args.bit_order)
    for name in res.shot_mismatches:
        print(f"warning: shot count differs from export for {name}", file=sys.stderr)
    records = records_from_list(res.records)
    cfg = cfg.with_overrides(run_types=tuple(rt for rt in cfg.run_types if rt in records) or None)
    fits, estimates = analyze(records, cfg.bootstrap_resamples, cfg.seed)
    result = ExperimentResult(cfg, records, fits, estimates)
    write_results(result, args.out)
    _print_estimates(result)
    print(f"wrote {args.out}")
    return 0


def cmd_plot(args) -> int:
    from .plotting import emit_plot_data, render_report

    paths = emit_plot_data(args.results, args.out) if args.no_figures else render_report(args.results, args.out)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rb422", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="experiment config (JSON)")
        p.add_argument("--seed", type=int)
        p.add_argument("--sequences", type=int, help="sequences per length")
        p.add_argument("--shots", type=int)
        p.add_argument("--resamples", type=int, help="bootstrap resamples (0 disables)")
        p.add_argument("--bit-order", choices=("circuit", "device"))
        return p

    p = sub.add_parser("verify", help="group orders, frame potentials and the code gate table")
    p.set_defaults(func=cmd_verify)

    p = with_config(sub.add_parser("run", help="simulate, fit, bootstrap and write a results file"))
    p.add_argument("--out", help="results file")
    p.add_argument("--plot-dir", help="also write CSV plot data and figures here")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fit", help="refit the records in a results file")
    p.add_argument("results")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bootstrap", help="bootstrap confidence intervals for a results file")
    p.add_argument("results")
    p.add_argument("--resamples", type=int, default=9999)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the updated results here")
    p.set_defaults(func=cmd_bootstrap)

    p = with_config(sub.add_parser("export-qasm", help="write one OpenQASM 2.0 program per sequence"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--simulate", action="store_true", help="also write simulated count files")
    p.set_defaults(func=cmd_export)

    p = with_config(sub.add_parser("ingest", help="score count files and analyze them"))
    p.add_argument("counts", help="directory of <sequence>.counts files")
    p.add_argument("--manifest", help="export manifest (default: counts directory)")
    p.add_argument("--out", default="results.jsonl")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("plot-data", help="CSV plot data and figures from a results file")
    p.add_argument("results")
    p.add_argument("--out", default="plots")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
