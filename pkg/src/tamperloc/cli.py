"""Command-line entry points.

    tamperloc localize   manifest + scorer -> prediction file (+ run log)
    tamperloc scores     manifest + scorer -> precomputed score file
    tamperloc evaluate   manifest + predictions -> metric report (JSON/CSV)
    tamperloc synthesize transcripts + audio -> tampered fixtures + manifest
    tamperloc report     metric report JSON -> CSV / table

Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

from . import annotations as ann
from . import pipeline as pipe
from . import scorers as sc
from . import splice as sp
from .errors import ScorerError, TamperlocError
from .metrics import evaluate_dataset
from .sweep import run_window_sweep, sweep_csv_rows, write_sweep_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SCORER = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_PARAM_FLAGS = {
    "coarse_window": "--coarse-window",
    "coarse_stride": "--coarse-stride",
    "coarse_threshold": "--coarse-threshold",
    "merge_gap": "--merge-gap",
    "extension": "--extension",
    "fine_window": "--fine-window",
    "fine_stride": "--fine-stride",
    "fine_threshold": "--fine-threshold",
}


def _add_param_flags(parser: argparse.ArgumentParser):
    for name, flag in _PARAM_FLAGS.items():
        kind = int if name == "merge_gap" else float
        parser.add_argument(flag, type=kind, default=None, dest=name)
    parser.add_argument("--no-cover-tail", action="store_true")
    parser.add_argument("--no-refine", action="store_true")
    parser.add_argument("--no-gap-merge", action="store_true")
    parser.add_argument("--params-file", default=None, help="JSON file with parameter overrides")


def _resolve_params(args) -> pipe.PipelineParams:
    """Precedence: flags > params file > defaults."""
    values: dict = {}
    if args.params_file:
        with open(args.params_file, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        known = {f.name for f in fields(pipe.PipelineParams)}
        unknown = set(loaded) - known
        if unknown:
            raise TamperlocError(f"unknown parameter(s) in params file: {sorted(unknown)}")
        values.update(loaded)
    for name in _PARAM_FLAGS:
        flag_value = getattr(args, name)
        if flag_value is not None:
            values[name] = flag_value
    params = pipe.PipelineParams(**values)
    if args.no_cover_tail:
        params = replace(params, cover_tail=False)
    if args.no_gap_merge:
        params = replace(params, merge_gap=0)
    return params


def _add_scorer_flags(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--scorer",
        default="oracle",
        help="oracle[:sigma[:min_overlap]] | energy | constant:P | "
        "precomputed:FILE | external:CMD",
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--timeout", type=float, default=30.0, help="external scorer timeout (s/request)")
    parser.add_argument("--sample-rate", type=int, default=16000)


def _truth_map(records):
    return {r.utt_id: r.ground_truth for r in records}


class _RunLog:
    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8", newline="\n") if path else None
        self._lock = threading.Lock()

    def write(self, event: dict):
        if self._fh is None:
            return
        with self._lock:
            self._fh.write(json.dumps(event) + "\n")

    def close(self):
        if self._fh is not None:
            self._fh.close()


def _run_batch(records, scorer_factory, per_worker, params, mode, workers, strict, log, record_scores=False):
    """Localize every record, preserving manifest order in the outputs.

    Returns (results, errors, score_rows) where results maps index ->
    LocalizeResult and errors maps index -> exception.
    """
    local = threading.local()
    shared_scorer = None if per_worker else scorer_factory()
    externals = []
    externals_lock = threading.Lock()

    def worker_scorer():
        if shared_scorer is not None:
            return shared_scorer
        scorer = getattr(local, "scorer", None)
        if scorer is None:
            scorer = scorer_factory()
            local.scorer = scorer
            with externals_lock:
                externals.append(scorer)
        return scorer

    results: dict[int, pipe.LocalizeResult] = {}
    errors: dict[int, Exception] = {}
    score_rows: dict[int, list[sc.ScoreRow]] = {}

    def process(index_record):
        index, record = index_record
        scorer = worker_scorer()
        if record_scores:
            scorer = sc.RecordingScorer(scorer)
        try:
            result = pipe.localize(record, scorer, params, mode)
        except Exception as exc:  # noqa: BLE001 -- reported per utterance
            errors[index] = exc
            log.write({"event": "error", "utt_id": record.utt_id, "error": str(exc)})
            if strict:
                raise
            return
        results[index] = result
        if record_scores:
            score_rows[index] = scorer.rows
        log.write(
            {
                "event": "utterance",
                "utt_id": record.utt_id,
                "coarse_calls": result.coarse_calls,
                "fine_calls": result.fine_calls,
                "total_calls": result.total_calls,
                "n_candidates": result.n_candidates,
                "n_predictions": result.prediction.predictions.count,
            }
        )

    try:
        if workers <= 1:
            for item in enumerate(records):
                process(item)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(process, enumerate(records)))
    finally:
        for scorer in externals:
            close = getattr(scorer, "close", None)
            if close:
                close()
    return results, errors, score_rows


def _batch_exit_code(errors) -> int:
    if not errors:
        return EXIT_OK
    if any(isinstance(exc, ScorerError) for exc in errors.values()):
        return EXIT_SCORER
    return EXIT_DATA


def cmd_localize(args) -> int:
    records = ann.read_manifest(args.manifest)
    params = _resolve_params(args)
    mode = ann.MODE_COARSE_ONLY if args.no_refine and args.mode == ann.MODE_FULL else args.mode
    factory, per_worker = sc.build_scorer(
        args.scorer,
        truth=_truth_map(records),
        seed=args.seed,
        sample_rate=args.sample_rate,
        timeout=args.timeout,
    )
    log = _RunLog(args.log)
    try:
        log.write(
            {
                "event": "start",
                "command": "localize",
                "manifest": str(args.manifest),
                "scorer": args.scorer,
                "mode": mode,
                "seed": args.seed,
                "workers": args.workers,
                "params": {f.name: getattr(params, f.name) for f in fields(params)},
                "n_utterances": len(records),
            }
        )
        results, errors, _ = _run_batch(
            records, factory, per_worker, params, mode, args.workers, args.strict, log
        )
        predictions = [results[i].prediction for i in sorted(results)]
        ann.write_predictions(predictions, args.output)
        total_calls = sum(r.total_calls for r in results.values())
        log.write({"event": "end", "n_errors": len(errors), "total_calls": total_calls})
    finally:
        log.close()
    if errors:
        for index in sorted(errors):
            print(f"error: {records[index].utt_id}: {errors[index]}", file=sys.stderr)
        print(f"{len(errors)} of {len(records)} utterances failed", file=sys.stderr)
    return _batch_exit_code(errors)


def cmd_scores(args) -> int:
    records = ann.read_manifest(args.manifest)
    params = _resolve_params(args)
    mode = ann.MODE_COARSE_ONLY if args.no_refine and args.mode == ann.MODE_FULL else args.mode
    factory, per_worker = sc.build_scorer(
        args.scorer,
        truth=_truth_map(records),
        seed=args.seed,
        sample_rate=args.sample_rate,
        timeout=args.timeout,
    )
    log = _RunLog(args.log)
    try:
        results, errors, score_rows = _run_batch(
            records,
            factory,
            per_worker,
            params,
            mode,
            args.workers,
            args.strict,
            log,
            record_scores=True,
        )
        ordered = [row for i in sorted(score_rows) for row in score_rows[i]]
        sc.write_score_file(ordered, args.output)
        if args.predictions:
            ann.write_predictions(
                [results[i].prediction for i in sorted(results)], args.predictions
            )
    finally:
        log.close()
    if errors:
        print(f"{len(errors)} of {len(records)} utterances failed", file=sys.stderr)
    return _batch_exit_code(errors)


def cmd_evaluate(args) -> int:
    records = ann.read_manifest(args.manifest)
    durations = {r.utt_id: r.duration for r in records}
    predictions = ann.read_predictions(args.predictions, durations)
    report = evaluate_dataset(
        records, predictions, taus=args.tau, include_genuine_fp=args.include_genuine_fp
    )
    for utt_id in report.missing_predictions:
        print(f"warning: no prediction for {utt_id}, counted as empty", file=sys.stderr)
    payload = report.as_dict()
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerows(report.csv_rows())
    overall = payload["overall"]
    print(
        f"utterances={overall['n_utterances']} fake={overall['n_fake']} "
        f"count_accuracy={overall['count_accuracy']:.4f} mean_iou={overall['mean_iou']:.4f} "
        f"false_alarm_rate={overall['false_alarm_rate']:.4f}"
    )
    for key, cell in overall["per_tau"].items():
        print(
            f"tau={key}: segment_f1={cell['segment_f1']:.4f} "
            f"precision={cell['segment_precision']:.4f} recall={cell['segment_recall']:.4f}"
        )
    return EXIT_OK


def cmd_synthesize(args) -> int:
    transcripts = sp.read_transcripts(args.transcripts)
    cfg = sp.SpliceConfig(
        min_chars=args.min_chars,
        min_word_dur=args.min_word_dur,
        min_index_gap=args.min_index_gap,
        strict_spacing=not args.loose_spacing,
        pad=args.pad,
        fade=args.fade,
        vad_top_db=args.top_db,
        gain_min=args.gain_min,
        gain_max=args.gain_max,
        long_utt_threshold=args.long_utt_threshold,
        annotate_fades=(args.annotate == "full"),
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = args.manifest_out or out_dir / "manifest.jsonl"
    provenance_path = args.provenance_out or out_dir / "provenance.jsonl"

    from . import audio as au

    records: list[ann.UtteranceRecord] = []
    provenance_lines: list[dict] = []
    for rec in transcripts:
        carrier = au.load_audio(rec.audio_path, args.sample_rate)
        if args.include_real:
            records.append(
                ann.UtteranceRecord(
                    rec.utt_id,
                    rec.audio_path,
                    carrier.duration,
                    args.language,
                    "real",
                    ann.validate_segment_set([], carrier.duration, require_disjoint=True),
                )
            )
        if args.family:
            sizes = sp.family_sizes(carrier.duration, cfg)
        else:
            sizes = [args.n_words]

        for n in sizes:
            variant_seed = args.seed + n
            if args.replacement == "synthetic":
                source = sp.SyntheticSource(variant_seed, duration=args.synthetic_duration)
            else:
                source = sp.DonorSource(
                    transcripts, variant_seed, args.sample_rate, exclude_utt=rec.utt_id
                )
            utt_id = f"{rec.utt_id}_fake{n}w"
            wav_path = out_dir / f"{utt_id}.wav"
            outcome = sp.synthesize_variant(
                carrier,
                rec.words,
                n,
                cfg,
                source,
                variant_seed,
                utt_id=utt_id,
                audio_path=str(wav_path),
                language=args.language,
            )
            au.save_wav(outcome.audio, wav_path, encoding="float32")
            records.append(outcome.record)
            provenance_lines.append(outcome.provenance)

    ann.write_manifest(records, manifest_path)
    with open(provenance_path, "w", encoding="utf-8", newline="\n") as fh:
        for line in provenance_lines:
            fh.write(json.dumps(line) + "\n")
    print(f"wrote {len(records)} manifest records to {manifest_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if "sweep" in payload:
        rows = sweep_csv_rows(payload)
    else:
        rows = _report_rows(payload)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        for row in rows:
            print(",".join(str(v) for v in row))
    return EXIT_OK


def _report_rows(payload: dict) -> list[list]:
    taus = payload["taus"]
    header = [
        "group_type",
        "group",
        "n_utterances",
        "n_fake",
        "n_genuine",
        "count_accuracy",
        "mean_iou",
        "false_alarm_rate",
    ]
    for tau in taus:
        header += [
            f"segment_f1@{tau:g}",
            f"segment_precision@{tau:g}",
            f"segment_recall@{tau:g}",
        ]
    rows = [header]

    def emit(group_type, name, cell):
        row = [
            group_type,
            name,
            cell["n_utterances"],
            cell["n_fake"],
            cell["n_genuine"],
            cell["count_accuracy"],
            cell["mean_iou"],
            cell["false_alarm_rate"],
        ]
        for tau in taus:
            t = cell["per_tau"][f"{tau:g}"]
            row += [t["segment_f1"], t["segment_precision"], t["segment_recall"]]
        rows.append(row)

    emit("overall", "all", payload["overall"])
    for name, cell in payload.get("per_language", {}).items():
        emit("language", name, cell)
    for name, cell in payload.get("per_variant", {}).items():
        emit("variant", name, cell)
    return rows


def cmd_sweep(args) -> int:
    records = ann.read_manifest(args.manifest)
    factory, _per_worker = sc.build_scorer(
        args.scorer,
        truth=_truth_map(records),
        seed=args.seed,
        sample_rate=args.sample_rate,
        timeout=args.timeout,
    )
    base = _resolve_params(args)
    result = run_window_sweep(records, factory, base, widths=args.widths, taus=args.tau)
    write_sweep_report(result, args.output)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerows(sweep_csv_rows(result))
    print(f"wrote sweep over W={list(args.widths)} to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tamperloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("localize", parents=[], help="run tamper localization over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mode", choices=ann.MODES, default=ann.MODE_FULL)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="abort the batch on the first error")
    p.add_argument("--log", default=None, help="JSONL run log (params + per-utterance call counts)")
    _add_scorer_flags(p)
    _add_param_flags(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("scores", help="precompute a score file by running the pipeline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--predictions", default=None, help="optionally also write predictions")
    p.add_argument("--mode", choices=ann.MODES, default=ann.MODE_FULL)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--log", default=None)
    _add_scorer_flags(p)
    _add_param_flags(p)
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--tau", type=float, nargs="+", default=[0.3, 0.5])
    p.add_argument("--report", default=None, help="metric report JSON path")
    p.add_argument("--csv", default=None, help="flat CSV path")
    p.add_argument(
        "--include-genuine-fp",
        action="store_true",
        help="fold genuine utterances with false alarms into the F1 average",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synthesize", help="generate splice-tampered fixtures")
    p.add_argument("--transcripts", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest-out", default=None)
    p.add_argument("--provenance-out", default=None)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--n-words", type=int, choices=(1, 2, 3), default=1)
    group.add_argument("--family", action="store_true", help="duration-gated 1/2/3-word family")
    p.add_argument("--replacement", choices=("synthetic", "donor"), default="synthetic")
    p.add_argument("--synthetic-duration", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--language", choices=ann.LANGUAGES, default="other")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--min-chars", type=int, default=3)
    p.add_argument("--min-word-dur", type=float, default=0.150)
    p.add_argument("--min-index-gap", type=int, default=4)
    p.add_argument("--loose-spacing", action="store_true")
    p.add_argument("--pad", type=float, default=0.030)
    p.add_argument("--fade", type=float, default=0.015)
    p.add_argument("--top-db", type=float, default=20.0)
    p.add_argument("--gain-min", type=float, default=0.5)
    p.add_argument("--gain-max", type=float, default=2.0)
    p.add_argument("--long-utt-threshold", type=float, default=10.0)
    p.add_argument("--annotate", choices=("full", "core"), default="full")
    p.add_argument("--no-real", dest="include_real", action="store_false")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("report", help="render a report JSON as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="coarse-window size sweep")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--csv", default=None)
    p.add_argument("--widths", type=float, nargs="+", default=[0.15, 0.25, 0.5, 1.0, 2.0])
    p.add_argument("--tau", type=float, nargs="+", default=[0.3, 0.5])
    _add_scorer_flags(p)
    _add_param_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScorerError as exc:
        print(f"scorer error: {exc}", file=sys.stderr)
        return EXIT_SCORER
    except (TamperlocError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
