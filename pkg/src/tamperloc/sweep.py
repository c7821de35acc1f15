"""Coarse-window size sweep: rerun localization at several window sizes
(stride locked to half the window) and tabulate the evaluation per size."""

from __future__ import annotations

import json
from dataclasses import replace
from typing import Callable, Sequence

from .annotations import UtteranceRecord
from .metrics import evaluate_dataset
from .pipeline import PipelineParams, run_pipeline
from .scorers import Scorer

DEFAULT_WIDTHS = (0.15, 0.25, 0.5, 1.0, 2.0)


def run_window_sweep(
    records: Sequence[UtteranceRecord],
    scorer_factory: Callable[[], Scorer],
    base_params: PipelineParams | None = None,
    widths: Sequence[float] = DEFAULT_WIDTHS,
    taus: Sequence[float] = (0.3, 0.5),
) -> dict:
    """Returns {"sweep": [{"coarse_window", "coarse_stride", "overall",
    "per_tau"}, ...]} with one entry per window size."""
    base = base_params or PipelineParams()
    entries = []
    for width in widths:
        params = replace(
            base,
            coarse_window=width,
            coarse_stride=width / 2.0,
            # the fine grid may never be coarser than the coarse grid
            fine_window=min(base.fine_window, width),
            fine_stride=min(base.fine_stride, width / 2.0),
        )
        scorer = scorer_factory()
        predictions = [run_pipeline(r, scorer, params).prediction for r in records]
        report = evaluate_dataset(records, predictions, taus)
        overall = report.overall.as_dict()
        entries.append(
            {
                "coarse_window": width,
                "coarse_stride": width / 2.0,
                "overall": overall,
                "per_tau": overall["per_tau"],
            }
        )
    return {"taus": list(taus), "sweep": entries}


def sweep_csv_rows(result: dict) -> list[list]:
    taus = result["taus"]
    header = ["coarse_window", "coarse_stride", "count_accuracy", "mean_iou"]
    for tau in taus:
        header += [f"segment_f1@{tau:g}", f"segment_precision@{tau:g}", f"segment_recall@{tau:g}"]
    rows = [header]
    for entry in result["sweep"]:
        overall = entry["overall"]
        row = [
            entry["coarse_window"],
            entry["coarse_stride"],
            overall["count_accuracy"],
            overall["mean_iou"],
        ]
        for tau in taus:
            cell = overall["per_tau"][f"{tau:g}"]
            row += [cell["segment_f1"], cell["segment_precision"], cell["segment_recall"]]
        rows.append(row)
    return rows


def write_sweep_report(result: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
