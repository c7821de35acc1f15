"""Segment-level evaluation: temporal IoU, greedy one-to-one matching,
per-utterance F1 at IoU thresholds, count accuracy, and dataset aggregation.

Per utterance, predictions are matched to ground-truth segments greedily
by descending IoU (one-to-one, only pairs with IoU >= tau). TP = matched
pairs, FP = unmatched predictions, FN = unmatched ground truths; F1 is
computed from those counts. Genuine utterances (no tampered segments) are
excluded from the F1 macro average but still count toward count accuracy
and the false-alarm rate.

Mean IoU uses the toolkit definition (the source metric is reported but
never defined): greedy matching with any positive overlap, unmatched
ground truths contributing zero, macro-averaged over tampered utterances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .annotations import PredictionRecord, SegmentSet, TimeSegment, UtteranceRecord
from .errors import UnknownUttError

MEAN_IOU_DEFINITION = (
    "toolkit definition: greedy matching at iou > 0, unmatched ground truths "
    "count 0, macro-averaged over tampered utterances"
)


def temporal_iou(a: TimeSegment, b: TimeSegment) -> float:
    """Duration of intersection over duration of union; 0 when disjoint."""
    intersection = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    union = a.duration + b.duration - intersection
    return intersection / union if union > 0 else 0.0


def iou_matrix(
    predictions: Sequence[TimeSegment], ground_truths: Sequence[TimeSegment]
) -> list[list[float]]:
    """Rows are predictions, columns ground truths."""
    return [[temporal_iou(p, g) for g in ground_truths] for p in predictions]


@dataclass(frozen=True)
class MatchResult:
    """One-to-one matches as (prediction index, ground-truth index) pairs,
    0-based, every matched pair's IoU >= tau."""

    pairs: tuple[tuple[int, int], ...]
    tau: float


def greedy_match(matrix: Sequence[Sequence[float]], tau: float) -> MatchResult:
    """Repeatedly match the globally largest unmatched IoU while it stays
    >= tau. Ties break toward the lowest prediction index, then the lowest
    ground-truth index, so reports are reproducible."""
    n_pred = len(matrix)
    n_true = len(matrix[0]) if n_pred else 0
    used_pred = [False] * n_pred
    used_true = [False] * n_true
    pairs = []
    while True:
        best = tau
        best_pair = None
        for m in range(n_pred):
            if used_pred[m]:
                continue
            row = matrix[m]
            for n in range(n_true):
                if used_true[n]:
                    continue
                if row[n] > best or (row[n] == best and best_pair is None):
                    best = row[n]
                    best_pair = (m, n)
        if best_pair is None:
            break
        used_pred[best_pair[0]] = True
        used_true[best_pair[1]] = True
        pairs.append(best_pair)
    return MatchResult(tuple(pairs), tau)


@dataclass(frozen=True)
class UtteranceMetrics:
    tau: float
    n_true: int
    n_pred: int
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    count_correct: bool
    matched_ious: tuple[float, ...]
    excluded_from_f1: bool  # genuine utterance, kept for CA / false alarms


def utterance_metrics(gt: SegmentSet, pred: SegmentSet, tau: float) -> UtteranceMetrics:
    """Counts and F1 for one utterance at one threshold. F1 is 0 whenever
    TP is 0; the 2TP / (2TP + FP + FN) form keeps simple fractions exact."""
    n_true = gt.count
    n_pred = pred.count
    matrix = iou_matrix(pred.segments, gt.segments)
    match = greedy_match(matrix, tau) if n_pred and n_true else MatchResult((), tau)
    tp = len(match.pairs)
    fp = n_pred - tp
    fn = n_true - tp
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_true if n_true else 0.0
    f1 = (2 * tp) / (2 * tp + fp + fn) if tp else 0.0
    return UtteranceMetrics(
        tau=tau,
        n_true=n_true,
        n_pred=n_pred,
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        count_correct=(n_true == n_pred),
        matched_ious=tuple(matrix[m][n] for m, n in match.pairs),
        excluded_from_f1=(n_true == 0),
    )


def count_accuracy(counts: Sequence[tuple[int, int]]) -> float:
    """Fraction of (true count, predicted count) pairs that agree, over all
    utterances including genuine ones."""
    if not counts:
        return 0.0
    return sum(1 for n_true, n_pred in counts if n_true == n_pred) / len(counts)


def mean_iou(gt: SegmentSet, pred: SegmentSet) -> float:
    """Per-utterance mean IoU over ground-truth segments (see
    MEAN_IOU_DEFINITION). Only defined for tampered utterances."""
    if gt.count == 0:
        raise ValueError("mean_iou is only defined for tampered utterances")
    if pred.count == 0:
        return 0.0
    matrix = iou_matrix(pred.segments, gt.segments)
    # tau -> 0+: accept any strictly positive overlap
    match = greedy_match(matrix, tau=1e-300)
    return sum(matrix[m][n] for m, n in match.pairs) / gt.count


# --- dataset-level aggregation ---------------------------------------------------


@dataclass(frozen=True)
class GroupMetrics:
    n_utterances: int
    n_fake: int
    n_genuine: int
    count_accuracy: float
    mean_iou: float
    false_alarm_rate: float
    f1: dict[float, float]
    precision: dict[float, float]
    recall: dict[float, float]

    def as_dict(self) -> dict:
        return {
            "n_utterances": self.n_utterances,
            "n_fake": self.n_fake,
            "n_genuine": self.n_genuine,
            "count_accuracy": self.count_accuracy,
            "mean_iou": self.mean_iou,
            "false_alarm_rate": self.false_alarm_rate,
            "per_tau": {
                _tau_key(tau): {
                    "segment_f1": self.f1[tau],
                    "segment_precision": self.precision[tau],
                    "segment_recall": self.recall[tau],
                }
                for tau in sorted(self.f1)
            },
        }


@dataclass(frozen=True)
class UtteranceEvaluation:
    utt_id: str
    language: str
    variant: str
    n_true: int
    n_pred: int
    count_correct: bool
    false_alarm: bool
    mean_iou: float | None  # None for genuine utterances
    per_tau: dict[float, UtteranceMetrics]


@dataclass(frozen=True)
class MetricReport:
    taus: tuple[float, ...]
    overall: GroupMetrics
    per_language: dict[str, GroupMetrics]
    per_variant: dict[str, GroupMetrics]
    utterances: tuple[UtteranceEvaluation, ...]
    missing_predictions: tuple[str, ...]
    include_genuine_fp: bool

    def as_dict(self) -> dict:
        return {
            "taus": list(self.taus),
            "mean_iou_definition": MEAN_IOU_DEFINITION,
            "genuine_fp_in_f1_average": self.include_genuine_fp,
            "missing_predictions": list(self.missing_predictions),
            "overall": self.overall.as_dict(),
            "per_tau": self.overall.as_dict()["per_tau"],
            "per_language": {k: v.as_dict() for k, v in sorted(self.per_language.items())},
            "per_variant": {k: v.as_dict() for k, v in sorted(self.per_variant.items())},
        }

    def csv_rows(self) -> list[list]:
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
        for tau in self.taus:
            key = _tau_key(tau)
            header += [f"segment_f1@{key}", f"segment_precision@{key}", f"segment_recall@{key}"]
        rows = [header]

        def emit(group_type: str, name: str, g: GroupMetrics):
            row = [
                group_type,
                name,
                g.n_utterances,
                g.n_fake,
                g.n_genuine,
                g.count_accuracy,
                g.mean_iou,
                g.false_alarm_rate,
            ]
            for tau in self.taus:
                row += [g.f1[tau], g.precision[tau], g.recall[tau]]
            rows.append(row)

        emit("overall", "all", self.overall)
        for name, group in sorted(self.per_language.items()):
            emit("language", name, group)
        for name, group in sorted(self.per_variant.items()):
            emit("variant", name, group)
        return rows


def _tau_key(tau: float) -> str:
    return f"{tau:g}"


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _aggregate(
    evaluations: list[UtteranceEvaluation],
    taus: Sequence[float],
    include_genuine_fp: bool,
) -> GroupMetrics:
    fake = [e for e in evaluations if e.n_true > 0]
    genuine = [e for e in evaluations if e.n_true == 0]
    f1: dict[float, float] = {}
    precision: dict[float, float] = {}
    recall: dict[float, float] = {}
    for tau in taus:
        pool = list(fake)
        if include_genuine_fp:
            pool += [e for e in genuine if e.false_alarm]
        f1[tau] = _mean([e.per_tau[tau].f1 for e in pool])
        precision[tau] = _mean([e.per_tau[tau].precision for e in pool])
        recall[tau] = _mean([e.per_tau[tau].recall for e in pool])
    return GroupMetrics(
        n_utterances=len(evaluations),
        n_fake=len(fake),
        n_genuine=len(genuine),
        count_accuracy=count_accuracy([(e.n_true, e.n_pred) for e in evaluations]),
        mean_iou=_mean([e.mean_iou for e in fake]),
        false_alarm_rate=(
            sum(1 for e in genuine if e.false_alarm) / len(genuine) if genuine else 0.0
        ),
        f1=f1,
        precision=precision,
        recall=recall,
    )


_EMPTY = SegmentSet((), None)


def evaluate_dataset(
    records: Sequence[UtteranceRecord],
    predictions: Sequence[PredictionRecord] | Mapping[str, PredictionRecord],
    taus: Sequence[float] = (0.3, 0.5),
    include_genuine_fp: bool = False,
) -> MetricReport:
    """Score a prediction set against the ground-truth manifest.

    Utterances without a prediction record are treated as predicting
    nothing (and reported in ``missing_predictions``). Predictions for
    unknown utterances raise UnknownUttError; duplicated prediction lines
    for one utterance raise ValueError.

    ``include_genuine_fp`` additionally folds genuine utterances carrying
    false alarms into the F1 macro average as zero-F1 entries (the strict
    tampered-only average is the default).
    """
    taus = tuple(taus)
    for tau in taus:
        if not (0.0 < tau <= 1.0):
            raise ValueError(f"tau {tau} outside (0, 1]")
    by_utt = {r.utt_id: r for r in records}
    if isinstance(predictions, Mapping):
        pred_map = dict(predictions)
    else:
        pred_map = {}
        for pred in predictions:
            if pred.utt_id in pred_map:
                raise ValueError(f"duplicate prediction for utterance {pred.utt_id!r}")
            pred_map[pred.utt_id] = pred
    for utt_id in pred_map:
        if utt_id not in by_utt:
            raise UnknownUttError(f"prediction for unknown utterance {utt_id!r}")

    evaluations = []
    missing = []
    for record in records:
        pred = pred_map.get(record.utt_id)
        if pred is None:
            missing.append(record.utt_id)
            pred_set = _EMPTY
        else:
            pred_set = pred.predictions
        per_tau = {
            tau: utterance_metrics(record.ground_truth, pred_set, tau) for tau in taus
        }
        evaluations.append(
            UtteranceEvaluation(
                utt_id=record.utt_id,
                language=record.language,
                variant=record.variant,
                n_true=record.ground_truth.count,
                n_pred=pred_set.count,
                count_correct=(record.ground_truth.count == pred_set.count),
                false_alarm=(record.ground_truth.count == 0 and pred_set.count > 0),
                mean_iou=(
                    mean_iou(record.ground_truth, pred_set) if record.is_fake else None
                ),
                per_tau=per_tau,
            )
        )

    def group_by(key) -> dict[str, GroupMetrics]:
        buckets: dict[str, list[UtteranceEvaluation]] = {}
        for ev in evaluations:
            buckets.setdefault(key(ev), []).append(ev)
        return {
            name: _aggregate(bucket, taus, include_genuine_fp)
            for name, bucket in buckets.items()
        }

    return MetricReport(
        taus=taus,
        overall=_aggregate(evaluations, taus, include_genuine_fp),
        per_language=group_by(lambda e: e.language),
        per_variant=group_by(lambda e: e.variant),
        utterances=tuple(evaluations),
        missing_predictions=tuple(missing),
        include_genuine_fp=include_genuine_fp,
    )
