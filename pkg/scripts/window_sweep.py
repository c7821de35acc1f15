#!/usr/bin/env python3
"""Coarse-window size ablation: rerun localization at several window sizes
(stride = W/2, everything else fixed) and tabulate the metrics per size.

    python scripts/window_sweep.py --manifest data/fixtures/manifest.jsonl \
        --scorer oracle --output sweep.json --csv sweep.csv
"""

import argparse
import csv

from tamperloc.annotations import read_manifest
from tamperloc.scorers import build_scorer
from tamperloc.sweep import DEFAULT_WIDTHS, run_window_sweep, sweep_csv_rows, write_sweep_report


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--output", required=True, help="sweep report JSON")
    parser.add_argument("--csv", default=None)
    parser.add_argument("--scorer", default="oracle")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--widths", type=float, nargs="+", default=list(DEFAULT_WIDTHS))
    parser.add_argument("--tau", type=float, nargs="+", default=[0.3, 0.5])
    args = parser.parse_args()

    records = read_manifest(args.manifest)
    factory, _per_worker = build_scorer(
        args.scorer, truth={r.utt_id: r.ground_truth for r in records}, seed=args.seed
    )
    result = run_window_sweep(records, factory, widths=args.widths, taus=args.tau)
    write_sweep_report(result, args.output)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerows(sweep_csv_rows(result))
    for row in sweep_csv_rows(result):
        print(*(f"{v:.4f}" if isinstance(v, float) else v for v in row), sep="\t")


if __name__ == "__main__":
    main()
