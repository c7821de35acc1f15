"""Canonical data model for utterances, tampered segments, and predictions.

Timestamps are decimal seconds everywhere; sample indices never appear in
file formats. Manifest, prediction, and score files are line-delimited
JSON (one object per line, UTF-8, LF terminators):

    manifest line   {"utt_id", "audio_path", "duration", "language",
                     "variant", "segments": [[start, end], ...]}
    prediction line {"utt_id", "mode", "segments": [[start, end], ...]}

Ground-truth segment sets must be pairwise disjoint; prediction sets are
allowed to overlap (the metrics handle it).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DegenerateError, OutOfRangeError, OverlapError, ParseError

LANGUAGES = ("EN", "FR", "DE", "IT", "ES", "VI", "other")
VARIANTS = ("real", "fake1w", "fake2w", "fake3w")

MODE_FULL = "isa"
MODE_COARSE_ONLY = "coarse_only"
MODE_FRAME_LEVEL = "frame_level"
MODE_UTTERANCE_LEVEL = "utterance_level"
MODES = (MODE_FULL, MODE_COARSE_ONLY, MODE_FRAME_LEVEL, MODE_UTTERANCE_LEVEL)

# Touching segments (end == next start) are not overlap; anything closer is.
_OVERLAP_EPS = 1e-9


@dataclass(frozen=True, order=True)
class TimeSegment:
    """Closed time interval [start, end] in seconds."""

    start: float
    end: float

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise DegenerateError(f"non-finite segment ({self.start}, {self.end})")
        if self.start >= self.end:
            raise DegenerateError(f"segment start {self.start} >= end {self.end}")
        if self.start < 0:
            raise OutOfRangeError(f"segment start {self.start} < 0")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SegmentSet:
    """Ordered set of segments within an utterance of known duration.

    ``utterance_duration`` may be None for predictions read back from file
    (the prediction format does not carry durations); range validation is
    skipped in that case.
    """

    segments: tuple[TimeSegment, ...]
    utterance_duration: float | None

    @property
    def count(self) -> int:
        return len(self.segments)

    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)


def validate_segment_set(
    segments: Iterable[TimeSegment] | SegmentSet,
    utterance_duration: float | None = None,
    require_disjoint: bool = False,
) -> SegmentSet:
    """Sort segments by start and enforce the segment-set invariants.

    Raises OutOfRangeError when a segment exceeds [0, duration] and
    OverlapError when ``require_disjoint`` is set and two segments share
    more than a touching point.
    """
    if isinstance(segments, SegmentSet):
        if utterance_duration is None:
            utterance_duration = segments.utterance_duration
        segments = segments.segments
    ordered = tuple(sorted(segments, key=lambda s: (s.start, s.end)))
    if utterance_duration is not None:
        for seg in ordered:
            if seg.end > utterance_duration + _OVERLAP_EPS:
                raise OutOfRangeError(
                    f"segment ({seg.start}, {seg.end}) exceeds duration {utterance_duration}"
                )
    if require_disjoint:
        for prev, nxt in zip(ordered, ordered[1:]):
            if nxt.start < prev.end - _OVERLAP_EPS:
                raise OverlapError(
                    f"segments ({prev.start}, {prev.end}) and ({nxt.start}, {nxt.end}) overlap"
                )
    return SegmentSet(ordered, utterance_duration)


def fake_ratio(segments: SegmentSet) -> float:
    """Total tampered duration divided by utterance duration (0 for empty)."""
    if not segments.segments:
        return 0.0
    if segments.utterance_duration is None:
        raise ValueError("fake_ratio needs a known utterance duration")
    return segments.total_duration() / segments.utterance_duration


def variant_for_count(n: int) -> str:
    return "real" if n == 0 else f"fake{n}w"


@dataclass(frozen=True)
class UtteranceRecord:
    """One ground-truth manifest entry."""

    utt_id: str
    audio_path: str
    duration: float
    language: str
    variant: str
    ground_truth: SegmentSet

    def __post_init__(self):
        if not self.duration > 0:
            raise DegenerateError(f"{self.utt_id}: duration must be > 0")
        if self.language not in LANGUAGES:
            raise ParseError(f"{self.utt_id}: unknown language {self.language!r}")
        if self.variant not in VARIANTS:
            raise ParseError(f"{self.utt_id}: unknown variant {self.variant!r}")
        expected = variant_for_count(self.ground_truth.count)
        if self.variant != expected:
            raise ParseError(
                f"{self.utt_id}: variant {self.variant!r} inconsistent with "
                f"{self.ground_truth.count} ground-truth segments"
            )

    @property
    def is_fake(self) -> bool:
        return self.ground_truth.count > 0


@dataclass(frozen=True)
class PredictionRecord:
    """Predicted segments for one utterance, tagged with the inference mode."""

    utt_id: str
    predictions: SegmentSet
    mode: str = MODE_FULL

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParseError(f"{self.utt_id}: unknown mode {self.mode!r}")


# --- line-delimited JSON I/O --------------------------------------------------


def _segments_payload(segments: SegmentSet) -> list[list[float]]:
    return [[s.start, s.end] for s in segments.segments]


def _parse_segments(raw, line: int) -> list[TimeSegment]:
    if not isinstance(raw, list):
        raise ParseError("'segments' must be a list of [start, end] pairs", line)
    out = []
    for pair in raw:
        if (
            not isinstance(pair, (list, tuple))
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) for v in pair)
        ):
            raise ParseError(f"bad segment entry {pair!r}", line)
        try:
            out.append(TimeSegment(float(pair[0]), float(pair[1])))
        except (DegenerateError, OutOfRangeError) as exc:
            raise ParseError(str(exc), line) from exc
    return out


def _load_json_line(raw: str, line: int) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line) from exc
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line)
    return obj


def _require(obj: dict, key: str, types, line: int):
    if key not in obj:
        raise ParseError(f"missing field {key!r}", line)
    value = obj[key]
    if not isinstance(value, types):
        raise ParseError(f"field {key!r} has wrong type {type(value).__name__}", line)
    return value


def manifest_line(record: UtteranceRecord) -> str:
    payload = {
        "utt_id": record.utt_id,
        "audio_path": record.audio_path,
        "duration": record.duration,
        "language": record.language,
        "variant": record.variant,
        "segments": _segments_payload(record.ground_truth),
    }
    return json.dumps(payload, ensure_ascii=False)


def read_manifest(path) -> list[UtteranceRecord]:
    """Read ground-truth utterance records; raises ParseError with the
    offending line number on any malformed or inconsistent entry."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            obj = _load_json_line(raw, lineno)
            utt_id = _require(obj, "utt_id", str, lineno)
            audio_path = _require(obj, "audio_path", str, lineno)
            duration = float(_require(obj, "duration", (int, float), lineno))
            language = _require(obj, "language", str, lineno)
            variant = _require(obj, "variant", str, lineno)
            segments = _parse_segments(_require(obj, "segments", list, lineno), lineno)
            try:
                gt = validate_segment_set(segments, duration, require_disjoint=True)
                records.append(
                    UtteranceRecord(utt_id, audio_path, duration, language, variant, gt)
                )
            except (DegenerateError, OutOfRangeError, OverlapError, ParseError) as exc:
                raise ParseError(str(exc), lineno) from exc
    return records


def write_manifest(records: Sequence[UtteranceRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(manifest_line(record) + "\n")


def prediction_line(record: PredictionRecord) -> str:
    payload = {
        "utt_id": record.utt_id,
        "mode": record.mode,
        "segments": _segments_payload(record.predictions),
    }
    return json.dumps(payload, ensure_ascii=False)


def read_predictions(path, durations: dict[str, float] | None = None) -> list[PredictionRecord]:
    """Read prediction records. Durations are not stored in the file; pass a
    ``utt_id -> duration`` mapping (e.g. from the manifest) to re-attach and
    range-check them."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            obj = _load_json_line(raw, lineno)
            utt_id = _require(obj, "utt_id", str, lineno)
            mode = _require(obj, "mode", str, lineno)
            segments = _parse_segments(_require(obj, "segments", list, lineno), lineno)
            duration = durations.get(utt_id) if durations else None
            try:
                segs = validate_segment_set(segments, duration, require_disjoint=False)
                records.append(PredictionRecord(utt_id, segs, mode))
            except (DegenerateError, OutOfRangeError, ParseError) as exc:
                raise ParseError(str(exc), lineno) from exc
    return records


def write_predictions(records: Sequence[PredictionRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(prediction_line(record) + "\n")
