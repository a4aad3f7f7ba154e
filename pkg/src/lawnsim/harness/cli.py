"""Command-line entry point: ``lawnsim gen|run|summarize|plot``.

Exit codes: 0 success, 2 configuration error, 3 engine contract violation.
The output root defaults to ``results`` and can be overridden with the
``LAWNSIM_OUT`` environment variable or ``--out``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from lawnsim.errors import ConfigError, ContractError
from lawnsim.harness.config import Case, default_spec, load_spec
from lawnsim.harness.plots import emit_plots, read_delays
from lawnsim.harness.runner import ResultTable, run_seeds, summarize, write_details

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3
OUT_ENV = "LAWNSIM_OUT"


def output_root(cli_value: str | None) -> Path:
    return Path(cli_value or os.environ.get(OUT_ENV) or "results")


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def cmd_gen(args) -> int:
    text = _dump(default_spec(args.case).to_dict())
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    spec = load_spec(args.spec)
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError("--seeds must be at least 1")
        spec = spec.with_seeds(args.seeds)
    out = run_seeds(spec, args.jobs)
    directory = output_root(args.out) / spec.case.value / spec.spec_hash()
    out.table.write(directory / "table.csv")
    (directory / "spec.json").write_text(_dump(spec.to_dict()))
    summary = summarize(out.table)
    (directory / "summary.json").write_text(_dump(summary))
    write_details(out, directory)
    delays = read_delays(directory / "delays.csv") if spec.case is Case.DELIVERY else None
    emit_plots(out.table, directory, delays=delays, overlay=out.seeds[0].overlay)
    print(directory)
    return EXIT_OK


def cmd_summarize(args) -> int:
    sys.stdout.write(_dump(summarize(ResultTable.read(args.table))))
    return EXIT_OK


def cmd_plot(args) -> int:
    table = ResultTable.read(args.table)
    here = Path(args.table).parent
    delays = overlay = None
    if (here / "delays.csv").exists():
        delays = read_delays(here / "delays.csv")
    if (here / "overlay.json").exists():
        overlay = json.loads((here / "overlay.json").read_text())
    for path in emit_plots(table, Path(args.out) if args.out else here, delays, overlay):
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lawnsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="print a default experiment spec")
    p.add_argument("--case", choices=[c.value for c in Case], default=Case.SELECTION.value)
    p.add_argument("-o", "--output", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run an experiment spec")
    p.add_argument("spec")
    p.add_argument("--seeds", type=int, help="override n_seeds")
    p.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./results)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="print summary JSON for a table")
    p.add_argument("table")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("plot", help="render SVG figures for a table")
    p.add_argument("table")
    p.add_argument("--out", help="directory for the SVGs (default: next to the table)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
