"""Black-box window scorers: every scorer maps an audio window to a
fake-confidence in [0, 1].

Built-in scorers:
  * ConstantScorer  -- fixed probability, for stubs and baselines
  * OracleScorer    -- reads ground truth; ideal (optionally noised) scores
  * EnergyScorer    -- logistic squashing of window RMS in dBFS (weak heuristic)
  * PrecomputedScorer -- exact lookup from a score file (1e-4 s key tolerance)
  * ExternalScorer  -- bridges to a subprocess over line-delimited JSON

Wire protocol (stdio, one JSON object per line):
  request  {"id": int, "audio_path": str, "start": float, "end": float}
  response {"id": int, "score": float}   or   {"id": int, "error": str}
Responses may arrive in any order; EOF on the request stream ends the
process. Score files hold lines {"utt_id", "start", "end", "score"}.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import struct
import subprocess
import threading
import zlib
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from . import audio as audio_mod
from .annotations import SegmentSet, TimeSegment
from .errors import (
    MissingScoreError,
    ParseError,
    ProtocolError,
    ScorerTimeoutError,
    ScorerUnavailableError,
)


@dataclass(frozen=True)
class ScoreRequest:
    utt_id: str
    audio_path: str
    start: float
    end: float

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad request interval ({self.start}, {self.end})")

    @property
    def window(self) -> TimeSegment:
        return TimeSegment(self.start, self.end)


@dataclass(frozen=True)
class WindowScore:
    request: ScoreRequest
    score: float

    def __post_init__(self):
        if math.isnan(self.score) or not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")


class Scorer(Protocol):
    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]: ...


def score_windows(scorer: Scorer, requests: Sequence[ScoreRequest]) -> list[WindowScore]:
    """Score a batch, preserving request order and validating the range."""
    values = scorer.score_batch(requests)
    if len(values) != len(requests):
        raise ProtocolError(
            f"scorer returned {len(values)} scores for {len(requests)} requests"
        )
    return [WindowScore(req, float(v)) for req, v in zip(requests, values)]


class ConstantScorer:
    def __init__(self, value: float):
        if not (0.0 <= value <= 1.0):
            raise ValueError("constant score must lie in [0, 1]")
        self.value = float(value)

    def score_batch(self, requests):
        return [self.value] * len(requests)


# --- ground-truth oracle ------------------------------------------------------


@dataclass(frozen=True)
class OracleConfig:
    """min_overlap = 0 flags any window with strictly positive overlap;
    a positive value requires overlap/|window| >= min_overlap."""

    min_overlap: float = 0.0
    noise_sigma: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.min_overlap <= 1.0):
            raise ValueError("min_overlap must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.noise_sigma > 0 and self.seed is None:
            raise ValueError("a seed is required when noise_sigma > 0")


def _float_bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def _noise(cfg: OracleConfig, key_ints: tuple[int, ...]) -> float:
    # Noise derives from (seed, request identity) so scores are pure
    # functions of their inputs regardless of batch order or threading.
    rng = np.random.default_rng((cfg.seed,) + key_ints)
    return float(rng.normal(0.0, cfg.noise_sigma))


def _oracle_base(gt: SegmentSet, window: TimeSegment, min_overlap: float) -> float:
    width = window.duration
    best = 0.0
    for seg in gt.segments:
        overlap = min(window.end, seg.end) - max(window.start, seg.start)
        if overlap > best:
            best = overlap
    return 1.0 if (best > 0 and (best / width) >= min_overlap) else 0.0


def oracle_score(gt: SegmentSet, window: TimeSegment, cfg: OracleConfig) -> float:
    """1 when the window overlaps a tampered segment enough, else 0, plus
    optional clipped Gaussian noise."""
    base = _oracle_base(gt, window, cfg.min_overlap)
    if cfg.noise_sigma > 0:
        base += _noise(cfg, (_float_bits(window.start), _float_bits(window.end)))
    return min(1.0, max(0.0, base))


class OracleScorer:
    """Scores windows from ground-truth annotations (test/verification use)."""

    def __init__(self, truth: Mapping[str, SegmentSet], cfg: OracleConfig | None = None):
        self.truth = dict(truth)
        self.cfg = cfg or OracleConfig()

    def score_batch(self, requests):
        out = []
        for req in requests:
            gt = self.truth.get(req.utt_id)
            if gt is None:
                raise MissingScoreError(f"no ground truth for utterance {req.utt_id!r}")
            score = _oracle_base(gt, req.window, self.cfg.min_overlap)
            if self.cfg.noise_sigma > 0:
                score += _noise(
                    self.cfg,
                    (
                        zlib.crc32(req.utt_id.encode("utf-8")),
                        _float_bits(req.start),
                        _float_bits(req.end),
                    ),
                )
            out.append(min(1.0, max(0.0, score)))
        return out


# --- energy heuristic ---------------------------------------------------------

_ENERGY_DB_CENTER = -30.0
_ENERGY_DB_SCALE = 4.0
_SILENCE_FLOOR = 1e-12


def energy_score(buf: audio_mod.AudioBuffer) -> float:
    """Monotone logistic squashing of window RMS (dBFS) into [0, 1]."""
    level = audio_mod.rms(buf)
    if level < _SILENCE_FLOOR:
        return 0.0
    db = 20.0 * math.log10(level)
    return 1.0 / (1.0 + math.exp(-(db - _ENERGY_DB_CENTER) / _ENERGY_DB_SCALE))


class EnergyScorer:
    """Loads each window from disk and scores it by energy. Weak baseline."""

    def __init__(self, sample_rate: int = audio_mod.DEFAULT_SAMPLE_RATE):
        self.sample_rate = sample_rate
        self._cache: dict[str, audio_mod.AudioBuffer] = {}
        self._lock = threading.Lock()

    def _buffer(self, path: str) -> audio_mod.AudioBuffer:
        with self._lock:
            buf = self._cache.get(path)
        if buf is None:
            buf = audio_mod.load_audio(path, self.sample_rate)
            with self._lock:
                self._cache[path] = buf
        return buf

    def score_batch(self, requests):
        out = []
        for req in requests:
            buf = self._buffer(req.audio_path)
            # manifest durations may disagree with the file by float dust
            end = min(req.end, buf.duration)
            window = audio_mod.extract_window(buf, req.start, end - req.start)
            out.append(energy_score(window))
        return out


# --- precomputed score tables ---------------------------------------------------

_KEY_TOLERANCE = 1e-4


def _quantize(t: float) -> int:
    return int(round(t / _KEY_TOLERANCE))


@dataclass(frozen=True)
class ScoreRow:
    utt_id: str
    start: float
    end: float
    score: float


def read_score_file(path) -> list[ScoreRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
                rows.append(
                    ScoreRow(
                        str(obj["utt_id"]),
                        float(obj["start"]),
                        float(obj["end"]),
                        float(obj["score"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad score line: {exc}", lineno) from exc
    return rows


def write_score_file(rows: Iterable[ScoreRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(
                json.dumps(
                    {
                        "utt_id": row.utt_id,
                        "start": row.start,
                        "end": row.end,
                        "score": row.score,
                    }
                )
                + "\n"
            )


class PrecomputedScorer:
    """Exact-match lookup on (utt_id, start, end) with 1e-4 s tolerance."""

    def __init__(self, rows: Iterable[ScoreRow]):
        self._table: dict[tuple[str, int, int], list[ScoreRow]] = {}
        for row in rows:
            key = (row.utt_id, _quantize(row.start), _quantize(row.end))
            self._table.setdefault(key, []).append(row)

    @classmethod
    def from_file(cls, path) -> "PrecomputedScorer":
        return cls(read_score_file(path))

    def lookup(self, request: ScoreRequest) -> float:
        qs, qe = _quantize(request.start), _quantize(request.end)
        for ds in (0, -1, 1):
            for de in (0, -1, 1):
                for row in self._table.get((request.utt_id, qs + ds, qe + de), ()):
                    if (
                        abs(row.start - request.start) <= _KEY_TOLERANCE + 1e-12
                        and abs(row.end - request.end) <= _KEY_TOLERANCE + 1e-12
                    ):
                        return row.score
        raise MissingScoreError(
            f"no precomputed score for {request.utt_id!r} "
            f"({request.start:.6f}, {request.end:.6f})"
        )

    def score_batch(self, requests):
        return [self.lookup(req) for req in requests]


def precomputed_lookup(scorer: PrecomputedScorer, request: ScoreRequest) -> float:
    return scorer.lookup(request)


class RecordingScorer:
    """Wraps a scorer and records every (request, score) pair seen."""

    def __init__(self, inner: Scorer):
        self.inner = inner
        self.rows: list[ScoreRow] = []
        self._lock = threading.Lock()

    def score_batch(self, requests):
        values = self.inner.score_batch(requests)
        with self._lock:
            self.rows.extend(
                ScoreRow(r.utt_id, r.start, r.end, float(v))
                for r, v in zip(requests, values)
            )
        return values


# --- external subprocess scorer --------------------------------------------------


class ExternalScorer:
    """Client side of the wire protocol. One process serves one request
    stream; use one scorer instance per worker for parallel runs."""

    def __init__(self, command: str | Sequence[str], timeout: float = 30.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._responses: queue.Queue = queue.Queue()
        self._next_id = 0

    def _ensure_started(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ScorerUnavailableError(f"cannot start scorer process: {exc}") from exc
        self._responses = queue.Queue()
        reader = threading.Thread(
            target=self._read_loop, args=(self._proc, self._responses), daemon=True
        )
        reader.start()

    @staticmethod
    def _read_loop(proc: subprocess.Popen, sink: queue.Queue):
        for line in proc.stdout:
            sink.put(line)
        sink.put(None)  # EOF marker

    def score_batch(self, requests):
        if not requests:
            return []
        self._ensure_started()
        proc = self._proc
        pending: dict[int, int] = {}
        lines = []
        for position, req in enumerate(requests):
            req_id = self._next_id
            self._next_id += 1
            pending[req_id] = position
            lines.append(
                json.dumps(
                    {
                        "id": req_id,
                        "audio_path": req.audio_path,
                        "start": req.start,
                        "end": req.end,
                    }
                )
            )

        def _write():
            try:
                for line in lines:
                    proc.stdin.write(line + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass  # reader loop will observe the dead process

        writer = threading.Thread(target=_write, daemon=True)
        writer.start()

        scores: list[float | None] = [None] * len(requests)
        while pending:
            try:
                raw = self._responses.get(timeout=self.timeout)
            except queue.Empty:
                self.close()
                raise ScorerTimeoutError(
                    f"no response within {self.timeout}s ({len(pending)} pending)"
                )
            if raw is None:
                self.close()
                raise ScorerUnavailableError(
                    f"scorer process exited with {len(pending)} requests pending"
                )
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                self.close()
                raise ProtocolError(f"malformed response line: {raw!r}") from exc
            if not isinstance(obj, dict) or "id" not in obj:
                self.close()
                raise ProtocolError(f"response missing id: {raw!r}")
            resp_id = obj["id"]
            if resp_id not in pending:
                self.close()
                raise ProtocolError(f"unexpected response id {resp_id!r}")
            if "error" in obj:
                self.close()
                raise ProtocolError(f"scorer error for id {resp_id}: {obj['error']}")
            score = obj.get("score")
            if (
                not isinstance(score, (int, float))
                or isinstance(score, bool)
                or math.isnan(score)
                or not (0.0 <= score <= 1.0)
            ):
                self.close()
                raise ProtocolError(f"score out of range for id {resp_id}: {score!r}")
            scores[pending.pop(resp_id)] = float(score)
        writer.join()
        return scores

    def close(self):
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def external_scorer_roundtrip(
    command: str | Sequence[str],
    requests: Sequence[ScoreRequest],
    timeout: float = 30.0,
) -> list[WindowScore]:
    """One-shot convenience wrapper: start, score, terminate."""
    with ExternalScorer(command, timeout=timeout) as scorer:
        return score_windows(scorer, requests)


# --- scorer spec strings (CLI) ----------------------------------------------------


def build_scorer(
    spec: str,
    truth: Mapping[str, SegmentSet] | None = None,
    seed: int | None = None,
    sample_rate: int = audio_mod.DEFAULT_SAMPLE_RATE,
    timeout: float = 30.0,
):
    """Parse a --scorer spec into a factory.

    Specs: oracle[:sigma[:min_overlap]] | energy | constant:P |
    precomputed:FILE | external:CMD. Returns (factory, per_worker): when
    ``per_worker`` is true each parallel worker must call the factory for
    a private instance (external processes); otherwise one shared instance
    is safe.
    """
    if spec.startswith("oracle"):
        parts = spec.split(":")
        sigma = float(parts[1]) if len(parts) > 1 and parts[1] else 0.0
        min_overlap = float(parts[2]) if len(parts) > 2 and parts[2] else 0.0
        if truth is None:
            raise ValueError("oracle scorer needs ground-truth annotations")
        cfg = OracleConfig(min_overlap=min_overlap, noise_sigma=sigma, seed=seed)
        scorer = OracleScorer(truth, cfg)
        return (lambda: scorer), False
    if spec == "energy":
        scorer = EnergyScorer(sample_rate)
        return (lambda: scorer), False
    if spec.startswith("constant:"):
        scorer = ConstantScorer(float(spec.split(":", 1)[1]))
        return (lambda: scorer), False
    if spec.startswith("precomputed:"):
        scorer = PrecomputedScorer.from_file(spec.split(":", 1)[1])
        return (lambda: scorer), False
    if spec.startswith("external:"):
        command = spec.split(":", 1)[1]
        return (lambda: ExternalScorer(command, timeout=timeout)), True
    raise ValueError(f"unknown scorer spec {spec!r}")
