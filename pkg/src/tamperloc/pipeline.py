"""Three-stage tamper localization plus the non-iterative baselines.

Stage 1 (coarse scan) slides overlapping windows of size W / stride S
across the utterance and scores each one, producing a confidence map.
Stage 2 (region proposal) thresholds the map at delta and merges flagged
windows that are at most ``merge_gap`` unflagged windows apart into
candidate regions; no flags means the utterance is declared genuine.
Stage 3 (boundary refinement) re-scans each candidate, extended by a
margin, on a finer grid (W' / S', threshold delta'), discards candidates
with no fine flags, and tightens boundaries to the flagged extent.

Window indices are 1-based; window k of a grid with stride S starts at
(k - 1) * S. Thresholds compare with >= at both stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .annotations import (
    MODE_COARSE_ONLY,
    MODE_FRAME_LEVEL,
    MODE_FULL,
    MODE_UTTERANCE_LEVEL,
    PredictionRecord,
    TimeSegment,
    UtteranceRecord,
    validate_segment_set,
)
from .scorers import Scorer, ScoreRequest, score_windows

_TAIL_EPS = 1e-9


@dataclass(frozen=True)
class PipelineParams:
    """Full hyperparameter set. Defaults follow the tuned configuration:
    coarse 0.5 s / 0.25 s / 0.6 with gap 2, extension 0.3 s, fine
    0.15 s / 0.05 s / 0.7."""

    coarse_window: float = 0.5
    coarse_stride: float = 0.25
    coarse_threshold: float = 0.6
    merge_gap: int = 2
    extension: float = 0.3
    fine_window: float = 0.15
    fine_stride: float = 0.05
    fine_threshold: float = 0.7
    cover_tail: bool = True

    def __post_init__(self):
        for name in ("coarse_window", "coarse_stride", "fine_window", "fine_stride"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("coarse_threshold", "fine_threshold"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.merge_gap < 0:
            raise ValueError("merge_gap must be >= 0")
        if self.extension < 0:
            raise ValueError("extension must be >= 0")
        if self.coarse_stride > self.coarse_window:
            raise ValueError("coarse_stride must not exceed coarse_window")
        if self.fine_stride > self.fine_window:
            raise ValueError("fine_stride must not exceed fine_window")
        # <= rather than <: the window-size sweep legitimately runs the
        # coarse window down to the fine window size.
        if self.fine_window > self.coarse_window:
            raise ValueError("fine_window must not exceed coarse_window")
        if self.fine_stride > self.coarse_stride:
            raise ValueError("fine_stride must not exceed coarse_stride")


@dataclass(frozen=True)
class ConfidenceMap:
    """Per-window scores over a uniform grid (plus an optional right-aligned
    tail window when ``cover_tail`` closed the end-of-utterance blind spot)."""

    window_starts: tuple[float, ...]
    window_dur: float
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.window_starts) != len(self.scores):
            raise ValueError("window_starts and scores must have equal length")

    @property
    def size(self) -> int:
        return len(self.window_starts)

    def interval(self, index: int) -> tuple[float, float]:
        """Window interval for a 1-based index."""
        start = self.window_starts[index - 1]
        return start, start + self.window_dur


@dataclass(frozen=True)
class CandidateRegion:
    start: float
    end: float
    cluster: tuple[int, ...]  # 1-based flagged window indices


def coarse_grid(
    duration: float, window: float, stride: float, cover_tail: bool = True
) -> list[tuple[float, float]]:
    """Window intervals [t_k, t_k + W], t_k = (k - 1) * S, with
    K = floor((D - W) / S) + 1.

    When the utterance is shorter than the window, the single interval
    [0, D] is returned. With ``cover_tail``, a final right-aligned window
    [D - W, D] is appended whenever the uniform grid stops short of D.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if duration < window:
        return [(0.0, duration)]
    count = int(math.floor((duration - window) / stride)) + 1
    grid = [((k - 1) * stride, (k - 1) * stride + window) for k in range(1, count + 1)]
    if cover_tail and grid[-1][1] < duration - _TAIL_EPS:
        grid.append((duration - window, duration))
    return grid


def flag_windows(cmap: ConfidenceMap, threshold: float) -> list[int]:
    """1-based indices of windows with score >= threshold, ascending."""
    return [k for k, score in enumerate(cmap.scores, start=1) if score >= threshold]


def merge_flagged(
    flagged: list[int], gap: int, cmap: ConfidenceMap
) -> list[CandidateRegion]:
    """Cluster flagged indices whose consecutive difference is <= gap + 1 and
    map each cluster to the region spanning its first window start through
    its last window end. An empty flag set yields no candidates."""
    if not flagged:
        return []
    clusters: list[list[int]] = [[flagged[0]]]
    for idx in flagged[1:]:
        if idx - clusters[-1][-1] <= gap + 1:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    regions = []
    for cluster in clusters:
        start, _ = cmap.interval(cluster[0])
        _, end = cmap.interval(cluster[-1])
        regions.append(CandidateRegion(start, end, tuple(cluster)))
    return regions


def _requests_for_grid(
    record: UtteranceRecord, grid: list[tuple[float, float]]
) -> list[ScoreRequest]:
    return [
        ScoreRequest(record.utt_id, record.audio_path, start, end)
        for start, end in grid
    ]


def coarse_scan(record: UtteranceRecord, scorer: Scorer, params: PipelineParams) -> ConfidenceMap:
    """Stage 1: score the coarse grid in order."""
    grid = coarse_grid(
        record.duration, params.coarse_window, params.coarse_stride, params.cover_tail
    )
    scored = score_windows(scorer, _requests_for_grid(record, grid))
    return ConfidenceMap(
        window_starts=tuple(start for start, _ in grid),
        window_dur=min(params.coarse_window, record.duration),
        scores=tuple(ws.score for ws in scored),
    )


def refine_region(
    record: UtteranceRecord,
    scorer: Scorer,
    region: CandidateRegion,
    params: PipelineParams,
) -> tuple[TimeSegment | None, int]:
    """Stage 3 for one candidate: returns (refined segment or None if the
    candidate was discarded, number of scorer calls spent)."""
    ext_start = max(0.0, region.start - params.extension)
    ext_end = min(record.duration, region.end + params.extension)
    span = ext_end - ext_start
    if span <= 0:
        return None, 0
    if span < params.fine_window:
        grid = [(ext_start, ext_end)]
        dur = span
    else:
        count = int(math.floor((span - params.fine_window) / params.fine_stride)) + 1
        grid = [
            (
                ext_start + (k - 1) * params.fine_stride,
                ext_start + (k - 1) * params.fine_stride + params.fine_window,
            )
            for k in range(1, count + 1)
        ]
        dur = params.fine_window
    scored = score_windows(scorer, _requests_for_grid(record, grid))
    flagged = [k for k, ws in enumerate(scored, start=1) if ws.score >= params.fine_threshold]
    if not flagged:
        return None, len(grid)  # false positive from the coarse stage
    first, last = flagged[0], flagged[-1]
    refined_start = ext_start + (first - 1) * params.fine_stride
    refined_end = min(ext_end, ext_start + (last - 1) * params.fine_stride + dur)
    return TimeSegment(refined_start, refined_end), len(grid)


def _merge_touching(segments: list[TimeSegment]) -> list[TimeSegment]:
    """Adjacent candidates' extended intervals can overlap; collapse any
    overlapping or touching refined segments into one."""
    if not segments:
        return []
    ordered = sorted(segments, key=lambda s: (s.start, s.end))
    merged = [ordered[0]]
    for seg in ordered[1:]:
        if seg.start <= merged[-1].end + _TAIL_EPS:
            if seg.end > merged[-1].end:
                merged[-1] = TimeSegment(merged[-1].start, seg.end)
        else:
            merged.append(seg)
    return merged


def _clip_segment(seg: TimeSegment, duration: float) -> TimeSegment | None:
    start = max(0.0, seg.start)
    end = min(duration, seg.end)
    return TimeSegment(start, end) if start < end else None


@dataclass(frozen=True)
class LocalizeResult:
    prediction: PredictionRecord
    coarse_calls: int
    fine_calls: int
    n_candidates: int

    @property
    def total_calls(self) -> int:
        return self.coarse_calls + self.fine_calls


def run_pipeline(
    record: UtteranceRecord,
    scorer: Scorer,
    params: PipelineParams | None = None,
    refine: bool = True,
) -> LocalizeResult:
    """Run the full three-stage pipeline (or stop after stage 2 when
    ``refine`` is false, which is exactly the coarse-only baseline)."""
    params = params or PipelineParams()
    cmap = coarse_scan(record, scorer, params)
    flagged = flag_windows(cmap, params.coarse_threshold)
    candidates = merge_flagged(flagged, params.merge_gap, cmap)
    mode = MODE_FULL if refine else MODE_COARSE_ONLY

    fine_calls = 0
    if refine:
        refined: list[TimeSegment] = []
        for region in candidates:
            segment, calls = refine_region(record, scorer, region, params)
            fine_calls += calls
            if segment is not None:
                refined.append(segment)
        segments = _merge_touching(refined)
    else:
        # stage-2 regions verbatim (they may touch; predictions need not be disjoint)
        segments = [TimeSegment(r.start, r.end) for r in candidates]

    clipped = [
        s for s in (_clip_segment(seg, record.duration) for seg in segments) if s is not None
    ]
    prediction = PredictionRecord(
        record.utt_id,
        validate_segment_set(clipped, record.duration, require_disjoint=False),
        mode,
    )
    return LocalizeResult(prediction, cmap.size, fine_calls, len(candidates))


def run_baseline(
    record: UtteranceRecord,
    scorer: Scorer,
    params: PipelineParams | None = None,
    mode: str = MODE_COARSE_ONLY,
) -> LocalizeResult:
    """Non-iterative baselines sharing the same scorer.

    frame_level: contiguous-run merging (gap 0), no refinement.
    coarse_only: gap-tolerant merging, no refinement.
    utterance_level: one full-signal score; [0, D] when it clears the
    coarse threshold, otherwise no prediction.
    """
    params = params or PipelineParams()
    if mode == MODE_COARSE_ONLY:
        return run_pipeline(record, scorer, params, refine=False)
    if mode == MODE_FRAME_LEVEL:
        result = run_pipeline(record, scorer, replace(params, merge_gap=0), refine=False)
        return replace(
            result, prediction=replace(result.prediction, mode=MODE_FRAME_LEVEL)
        )
    if mode == MODE_UTTERANCE_LEVEL:
        scored = score_windows(
            scorer,
            [ScoreRequest(record.utt_id, record.audio_path, 0.0, record.duration)],
        )
        segments = (
            [TimeSegment(0.0, record.duration)]
            if scored[0].score >= params.coarse_threshold
            else []
        )
        prediction = PredictionRecord(
            record.utt_id,
            validate_segment_set(segments, record.duration),
            MODE_UTTERANCE_LEVEL,
        )
        return LocalizeResult(prediction, 1, 0, 0)
    raise ValueError(f"unknown baseline mode {mode!r}")


def localize(
    record: UtteranceRecord,
    scorer: Scorer,
    params: PipelineParams | None = None,
    mode: str = MODE_FULL,
) -> LocalizeResult:
    """Dispatch on mode: the full pipeline or one of the baselines."""
    if mode == MODE_FULL:
        return run_pipeline(record, scorer, params, refine=True)
    return run_baseline(record, scorer, params, mode)
