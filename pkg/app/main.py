"""
Command-line entry point: ``python -m app.main <subcommand>``.

construct  build a catalog code and its CSS pair, write h1/h2 and a header
verify     check the catalog (shapes, rates, mask checksums, CSS identity)
sweep      run a Monte-Carlo sweep from an INI config, write the CSV
eve        Eve information bound from the C1 and C2perp coset sweeps
coverage   coverage in C2perp/C1perp next to the reference table
"""
import argparse
import asyncio
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
from dotenv import load_dotenv

from app.config import H1_COLUMN_ORDER, H1_COLUMN_ORDER_CHOICES, LOG_LEVEL, RESULTS_DIR
from app.coding.css import CssPair
from app.services.catalog_service import CatalogService, column_weight_profile
from app.services.experiment_service import ExperimentService, load_sweep_config
from app.utils.error_handler import EXIT_OK, ErrorHandler, VerificationFailed
from app.utils.file_handler import FileHandler
from app.utils.log_sinks import configure_console

load_dotenv()

error_handler = ErrorHandler()


def _print_table(df: pd.DataFrame) -> None:
    with pd.option_context("display.max_rows", None, "display.width", 160):
        print(df.to_string(index=False))


@error_handler.cli_error_handler
def cmd_construct(args: argparse.Namespace) -> int:
    catalog = CatalogService()
    code = catalog.build_code(args.code_id)
    pair = catalog.build_pair(args.code_id, args.column_order)
    header = {"code_id": args.code_id, "column_order": args.column_order,
              "rate": str(code.rate), **pair.header()}
    stem = args.code_id.replace("/", "-")
    paths = asyncio.run(FileHandler().export_pair(pair.h1, pair.h2, header, args.out, stem))
    print(f"{args.code_id}: {code.h.rows}x{code.h.cols}, rate {code.rate}, "
          f"column weights {column_weight_profile(code.h)}")
    print(f"rank(h2) = {pair.rank_h2}, CSS rate = {header['css_rate']}")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


@error_handler.cli_error_handler
def cmd_verify(args: argparse.Namespace) -> int:
    if args.h1 or args.h2:
        if not (args.h1 and args.h2):
            raise ValueError("--h1 and --h2 go together")
        handler = FileHandler()
        h1 = asyncio.run(handler.read_matrix(args.h1))
        h2 = asyncio.run(handler.read_matrix(args.h2))
        failures = CatalogService().verify_pair(CssPair(h1, h2))
        if failures:
            raise VerificationFailed("; ".join(failures))
        print(f"pair {args.h1} / {args.h2}: pass")
        return EXIT_OK

    catalog = CatalogService()
    ids: Optional[List[str]] = args.codes or (catalog.code_ids(args.family) if args.family else None)
    report = catalog.verify_catalog(ids, include_css=not args.skip_css, column_order=args.column_order)
    _print_table(report.table)
    if not report.passed:
        raise VerificationFailed("; ".join(report.failures))
    print(f"all {len(report.rows)} codes pass")
    return EXIT_OK


@error_handler.cli_error_handler
def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = asyncio.run(load_sweep_config(args.config))
    if args.trials is not None:
        cfg = type(cfg).model_validate({**cfg.model_dump(), "trials": args.trials})
    result = asyncio.run(ExperimentService().run_sweep(cfg))
    _print_table(result.summary)
    for path in result.paths:
        print(f"wrote {path}")
    return EXIT_OK


@error_handler.cli_error_handler
def cmd_eve(args: argparse.Namespace) -> int:
    cfg = asyncio.run(load_sweep_config(args.config))
    service = ExperimentService()
    key_len = args.key_len
    if key_len is None:
        key_len = service.catalog.build_pair(cfg.code_id, cfg.column_order).css_dimension
    report = asyncio.run(service.report_eve(cfg, key_len))
    print(f"Eve bound for a {key_len}-bit key (δ = worse coset BLER, 95% Clopper-Pearson interval)")
    _print_table(report)
    return EXIT_OK


@error_handler.cli_error_handler
def cmd_coverage(args: argparse.Namespace) -> int:
    cfg = asyncio.run(load_sweep_config(args.config))
    table = asyncio.run(ExperimentService().coverage_table(cfg))
    print("coverage in C2perp/C1perp (%): measured vs reference")
    _print_table(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="app.main", description="CSS-LDPC key reconciliation experiments")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="console log level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build a code and its CSS pair")
    p.add_argument("code_id")
    p.add_argument("--out", type=Path, default=RESULTS_DIR / "codes")
    p.add_argument("--column-order", choices=H1_COLUMN_ORDER_CHOICES, default=H1_COLUMN_ORDER)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", help="verify the code catalog or an exported pair")
    p.add_argument("--codes", nargs="*", help="code ids (default: all)")
    p.add_argument("--family", nargs="*", choices=["appendix", "mini", "toy", "near-regular"])
    p.add_argument("--skip-css", action="store_true", help="only shapes, rates and checksums")
    p.add_argument("--column-order", choices=H1_COLUMN_ORDER_CHOICES, default=H1_COLUMN_ORDER)
    p.add_argument("--h1", type=Path)
    p.add_argument("--h2", type=Path)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a BLER sweep from a config file")
    p.add_argument("config", type=Path)
    p.add_argument("--trials", type=int, help="override trials per point")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eve", help="Eve information bound report")
    p.add_argument("config", type=Path)
    p.add_argument("--key-len", type=int)
    p.set_defaults(func=cmd_eve)

    p = sub.add_parser("coverage", help="coverage report")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_coverage)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_console(args.log_level)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
