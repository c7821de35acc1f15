"""Deterministic splice-tamper fixture generation with exact annotations.

Pipeline per replaced word: constraint-based word selection, silence
trimming of the replacement snippet (energy VAD), RMS gain matching
against the original word (clamped), then a padded cut of the carrier
with raised-cosine crossfades at both boundaries. Splices are applied
right-to-left so earlier word timestamps stay valid; every timestamp
shift is recorded in the provenance sidecar.

Ground truth annotates the full spliced interval including the fades by
default (the fades contain synthetic content); set ``annotate_fades``
False to annotate the core only.

Transcript files are line-delimited JSON:
    {"utt_id", "audio_path", "words": [{"text", "start", "end"}, ...]}
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .annotations import TimeSegment, UtteranceRecord, validate_segment_set
from .audio import AudioBuffer, extract_window, load_audio, rms, sample_index
from .errors import (
    AllSilentError,
    InfeasibleError,
    ParseError,
    RangeError,
    SilentSegmentError,
)

_SILENCE_FLOOR = 1e-12
_TRIM_FRAME_SEC = 0.010

RELAXATION_LEVELS = ("full", "no_spacing", "no_spacing_chars", "count_only")


@dataclass(frozen=True)
class WordToken:
    text: str
    start: float
    end: float
    index: int

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SpliceConfig:
    min_chars: int = 3
    min_word_dur: float = 0.150
    min_index_gap: int = 4
    strict_spacing: bool = True  # >= min_index_gap words strictly between picks
    pad: float = 0.030
    fade: float = 0.015
    vad_top_db: float = 20.0
    gain_min: float = 0.5
    gain_max: float = 2.0
    long_utt_threshold: float = 10.0
    annotate_fades: bool = True

    def __post_init__(self):
        if min(self.min_word_dur, self.pad, self.fade, self.vad_top_db) <= 0:
            raise ValueError("durations and top_db must be positive")
        if self.fade > self.pad:
            raise ValueError("fade must not exceed pad")
        if not (0 < self.gain_min <= self.gain_max):
            raise ValueError("bad gain clamp range")

    @property
    def required_index_gap(self) -> int:
        return self.min_index_gap + 1 if self.strict_spacing else self.min_index_gap


def select_words(
    transcript: Sequence[WordToken], n: int, cfg: SpliceConfig, seed: int
) -> tuple[list[WordToken], str]:
    """Pick ``n`` replacement targets by seeded shuffle + greedy acceptance.

    Constraints: text length >= min_chars, duration >= min_word_dur, and
    pairwise index distance >= required_index_gap. When a level cannot
    yield ``n`` words the constraints relax in order: spacing, then
    character length, then duration. Returns the picks sorted by start
    plus the relaxation level used; raises InfeasibleError when even the
    fully relaxed pool is too small.
    """
    if not transcript:
        raise InfeasibleError("empty transcript")
    if n < 1:
        raise ValueError("n must be >= 1")

    def admissible(level: str):
        pool = list(transcript)
        if level in ("full", "no_spacing"):
            pool = [w for w in pool if len(w.text) >= cfg.min_chars]
        if level in ("full", "no_spacing", "no_spacing_chars"):
            pool = [w for w in pool if w.duration >= cfg.min_word_dur]
        return pool

    for level in RELAXATION_LEVELS:
        pool = admissible(level)
        if len(pool) < n:
            continue
        rng = random.Random(seed)
        shuffled = list(pool)
        rng.shuffle(shuffled)
        picked: list[WordToken] = []
        gap = cfg.required_index_gap if level == "full" else 0
        for token in shuffled:
            if gap and any(abs(token.index - p.index) < gap for p in picked):
                continue
            if any(token.index == p.index for p in picked):
                continue
            picked.append(token)
            if len(picked) == n:
                return sorted(picked, key=lambda w: w.start), level
    raise InfeasibleError(
        f"cannot select {n} words from a transcript of {len(transcript)} even fully relaxed"
    )


def _frame_rms(samples: np.ndarray, frame_len: int) -> np.ndarray:
    n_frames = math.ceil(len(samples) / frame_len)
    out = np.empty(n_frames)
    for i in range(n_frames):
        frame = samples[i * frame_len : (i + 1) * frame_len]
        out[i] = math.sqrt(float(np.mean(np.square(frame))))
    return out


def trim_silence(seg: AudioBuffer, top_db: float) -> AudioBuffer:
    """Drop leading/trailing 10 ms frames more than ``top_db`` below the
    peak frame RMS; the interior is untouched."""
    frame_len = max(1, round(_TRIM_FRAME_SEC * seg.sample_rate))
    levels = _frame_rms(seg.samples, frame_len)
    peak = float(levels.max()) if len(levels) else 0.0
    if peak < _SILENCE_FLOOR:
        raise AllSilentError("segment is entirely silent")
    threshold = peak * 10.0 ** (-top_db / 20.0)
    keep = np.flatnonzero(levels >= threshold)
    if len(keep) == 0:
        raise AllSilentError("every frame is below the trim threshold")
    first, last = int(keep[0]), int(keep[-1])
    lo = first * frame_len
    hi = min(seg.length, (last + 1) * frame_len)
    return AudioBuffer(seg.samples[lo:hi].copy(), seg.sample_rate)


def match_gain(replacement: AudioBuffer, original_word: AudioBuffer, cfg: SpliceConfig) -> float:
    """RMS ratio original/replacement, clamped to the config range."""
    r_orig = rms(original_word)
    r_rep = rms(replacement)
    if r_orig < _SILENCE_FLOOR or r_rep < _SILENCE_FLOOR:
        raise SilentSegmentError("gain matching needs non-silent audio on both sides")
    return float(min(cfg.gain_max, max(cfg.gain_min, r_orig / r_rep)))


@dataclass(frozen=True)
class SpliceEdit:
    """Bookkeeping for one applied splice, all indices in samples."""

    carrier_cut: tuple[int, int]  # [a, b) removed from the carrier timeline
    output_span: tuple[int, int]  # [a, a + P) in the output timeline
    shift: float  # seconds added to every later timestamp


def crossfade_splice(
    carrier: AudioBuffer,
    slot: TimeSegment,
    replacement: AudioBuffer,
    cfg: SpliceConfig,
) -> tuple[AudioBuffer, TimeSegment, float]:
    """Replace carrier[slot - pad : slot + pad] with the replacement,
    blending the first and last ``fade`` seconds against the removed
    carrier audio with complementary raised-cosine weights.

    Returns the tampered buffer, the spliced interval (fades included) in
    the output timeline, and the shift applied to all later timestamps.
    """
    out, edit = _apply_splice(carrier, slot, replacement, cfg)
    rate = carrier.sample_rate
    spliced = TimeSegment(edit.output_span[0] / rate, edit.output_span[1] / rate)
    return out, spliced, edit.shift


def _apply_splice(
    carrier: AudioBuffer,
    slot: TimeSegment,
    replacement: AudioBuffer,
    cfg: SpliceConfig,
) -> tuple[AudioBuffer, SpliceEdit]:
    rate = carrier.sample_rate
    if replacement.sample_rate != rate:
        raise ValueError("replacement sample rate differs from carrier")
    half_sample = 0.5 / rate
    if slot.start - cfg.pad < -half_sample:
        raise RangeError(f"slot start {slot.start} too close to the beginning for pad")
    if slot.end + cfg.pad > carrier.duration + half_sample:
        raise RangeError(f"slot end {slot.end} too close to the end for pad")
    a = max(0, sample_index(slot.start - cfg.pad, rate))
    b = min(carrier.length, sample_index(slot.end + cfg.pad, rate))
    fade_len = round(cfg.fade * rate)
    n_rep = replacement.length
    if n_rep < 2 * fade_len:
        raise RangeError(f"replacement ({n_rep} samples) shorter than two fades")
    if b - a < fade_len:
        raise RangeError("padded slot shorter than one fade")

    removed = carrier.samples[a:b]
    mid = replacement.samples.copy()
    # difference form keeps w*x + (1-w)*x exactly x for constant signals
    ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(fade_len) / fade_len))
    mid[:fade_len] = removed[:fade_len] + ramp * (mid[:fade_len] - removed[:fade_len])
    mid[n_rep - fade_len :] = removed[b - a - fade_len :] + ramp[::-1] * (
        mid[n_rep - fade_len :] - removed[b - a - fade_len :]
    )

    out = np.concatenate([carrier.samples[:a], mid, carrier.samples[b:]])
    shift = (n_rep - (b - a)) / rate
    return (
        AudioBuffer(out, rate),
        SpliceEdit(carrier_cut=(a, b), output_span=(a, a + n_rep), shift=shift),
    )


# --- replacement sources -----------------------------------------------------------


class ReplacementSource(Protocol):
    def snippet(self, word: WordToken, slot_samples: int, rate: int) -> AudioBuffer: ...

    def describe(self, word: WordToken) -> dict: ...


class SyntheticSource:
    """Seeded band-limited noise bursts; no synthesis stack required.

    With ``duration`` None each snippet exactly fills the padded slot, so
    splices are length-preserving; a fixed duration exercises the
    timestamp-shift path.
    """

    def __init__(self, seed: int, duration: float | None = None, amplitude: float = 0.25):
        self.seed = seed
        self.duration = duration
        self.amplitude = amplitude

    def snippet(self, word: WordToken, slot_samples: int, rate: int) -> AudioBuffer:
        n = slot_samples if self.duration is None else max(1, round(self.duration * rate))
        rng = np.random.default_rng((self.seed, word.index))
        noise = rng.normal(0.0, 1.0, n)
        kernel = np.ones(8) / 8.0
        smooth = np.convolve(noise, kernel, mode="same")
        peak = float(np.max(np.abs(smooth)))
        return AudioBuffer(self.amplitude * smooth / peak, rate)

    def describe(self, word: WordToken) -> dict:
        return {"kind": "synthetic", "seed": self.seed, "word_index": word.index}


class DonorSource:
    """Cuts replacement words out of other recordings in a transcript pool."""

    def __init__(
        self,
        pool: Sequence["TranscriptRecord"],
        seed: int,
        sample_rate: int,
        exclude_utt: str | None = None,
        min_duration: float = 0.05,
    ):
        self.seed = seed
        self.sample_rate = sample_rate
        self._cache: dict[str, AudioBuffer] = {}
        self.candidates = [
            (rec.utt_id, rec.audio_path, token)
            for rec in pool
            if rec.utt_id != exclude_utt
            for token in rec.words
            if token.duration >= min_duration
        ]
        if not self.candidates:
            raise InfeasibleError("donor pool has no usable words")
        self._picks: dict[int, tuple[str, str, WordToken]] = {}

    def _pick(self, word: WordToken) -> tuple[str, str, WordToken]:
        if word.index not in self._picks:
            rng = np.random.default_rng((self.seed, word.index))
            self._picks[word.index] = self.candidates[
                int(rng.integers(len(self.candidates)))
            ]
        return self._picks[word.index]

    def snippet(self, word: WordToken, slot_samples: int, rate: int) -> AudioBuffer:
        utt_id, path, token = self._pick(word)
        buf = self._cache.get(path)
        if buf is None:
            buf = load_audio(path, self.sample_rate)
            self._cache[path] = buf
        return extract_window(buf, token.start, token.duration)

    def describe(self, word: WordToken) -> dict:
        utt_id, _path, token = self._pick(word)
        return {
            "kind": "donor",
            "donor_utt": utt_id,
            "donor_text": token.text,
            "word_index": word.index,
        }


# --- full variant synthesis -----------------------------------------------------------


@dataclass(frozen=True)
class SpliceOutcome:
    audio: AudioBuffer
    record: UtteranceRecord
    spliced_full: tuple[TimeSegment, ...]  # fades included, output timeline
    provenance: dict


def synthesize_variant(
    carrier: AudioBuffer,
    transcript: Sequence[WordToken],
    n_words: int,
    cfg: SpliceConfig,
    source: ReplacementSource,
    seed: int,
    utt_id: str,
    audio_path: str,
    language: str = "other",
) -> SpliceOutcome:
    """Replace ``n_words`` selected words in the carrier and emit the
    tampered audio together with exact output-timeline annotations."""
    duration = carrier.duration
    eligible = [
        w
        for w in transcript
        if w.start - cfg.pad >= 0 and w.end + cfg.pad <= duration + 0.5 / carrier.sample_rate
    ]
    if not eligible:
        raise InfeasibleError("no word lies far enough from the utterance edges")
    selected, relaxation = select_words(eligible, n_words, cfg, seed)
    for prev, nxt in zip(selected, selected[1:]):
        if nxt.start - cfg.pad < prev.end + cfg.pad:
            raise InfeasibleError(
                f"padded slots of words {prev.index} and {nxt.index} overlap"
            )

    current = carrier
    rate = carrier.sample_rate
    annotated: list[TimeSegment] = []  # fades included
    word_logs: list[dict] = []
    for word in reversed(selected):  # right-to-left keeps earlier slots valid
        slot = TimeSegment(word.start, word.end)
        slot_samples = sample_index(word.end + cfg.pad, rate) - sample_index(
            word.start - cfg.pad, rate
        )
        raw = source.snippet(word, slot_samples, rate)
        trimmed = trim_silence(raw, cfg.vad_top_db)
        original_word = extract_window(current, word.start, word.duration)
        gain = match_gain(trimmed, original_word, cfg)
        adjusted = AudioBuffer(trimmed.samples * gain, rate)
        current, edit = _apply_splice(current, slot, adjusted, cfg)
        annotated = [
            TimeSegment(seg.start + edit.shift, seg.end + edit.shift) for seg in annotated
        ]
        annotated.append(
            TimeSegment(edit.output_span[0] / rate, edit.output_span[1] / rate)
        )
        word_logs.append(
            {
                "text": word.text,
                "index": word.index,
                "carrier_slot": [word.start, word.end],
                "carrier_cut_samples": list(edit.carrier_cut),
                "output_span_samples": list(edit.output_span),
                "gain": gain,
                "shift": edit.shift,
                "replacement": source.describe(word),
            }
        )

    annotated.sort(key=lambda s: s.start)
    fade = cfg.fade
    if cfg.annotate_fades:
        segments = annotated
    else:
        segments = [TimeSegment(s.start + fade, s.end - fade) for s in annotated]
    gt = validate_segment_set(segments, current.duration, require_disjoint=True)
    record = UtteranceRecord(
        utt_id=utt_id,
        audio_path=audio_path,
        duration=current.duration,
        language=language,
        variant=f"fake{n_words}w",
        ground_truth=gt,
    )
    provenance = {
        "utt_id": utt_id,
        "seed": seed,
        "n_words": n_words,
        "relaxation": relaxation,
        "annotate_fades": cfg.annotate_fades,
        "output_duration": current.duration,
        "words": list(reversed(word_logs)),  # ascending start order
    }
    return SpliceOutcome(current, record, tuple(annotated), provenance)


def family_sizes(duration: float, cfg: SpliceConfig) -> list[int]:
    """Variant family for one carrier: 1- and 2-word always, 3-word only
    for utterances at or above the long-utterance threshold."""
    sizes = [1, 2]
    if duration >= cfg.long_utt_threshold:
        sizes.append(3)
    return sizes


def synthesize_family(
    carrier: AudioBuffer,
    transcript: Sequence[WordToken],
    cfg: SpliceConfig,
    source_factory,
    seed: int,
    utt_id: str,
    audio_path_for,
    language: str = "other",
) -> list[SpliceOutcome]:
    """Generate the duration-gated variant family. Each variant draws its
    own seed (base seed + word count) and replacement source."""
    outcomes = []
    for n in family_sizes(carrier.duration, cfg):
        variant_seed = seed + n
        outcomes.append(
            synthesize_variant(
                carrier,
                transcript,
                n,
                cfg,
                source_factory(variant_seed),
                variant_seed,
                utt_id=f"{utt_id}_fake{n}w",
                audio_path=audio_path_for(n),
                language=language,
            )
        )
    return outcomes


# --- transcript file I/O -----------------------------------------------------------


@dataclass(frozen=True)
class TranscriptRecord:
    utt_id: str
    audio_path: str
    words: tuple[WordToken, ...]


def read_transcripts(path) -> list[TranscriptRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
                words = tuple(
                    WordToken(str(w["text"]), float(w["start"]), float(w["end"]), i)
                    for i, w in enumerate(obj["words"])
                )
                records.append(
                    TranscriptRecord(str(obj["utt_id"]), str(obj["audio_path"]), words)
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad transcript line: {exc}", lineno) from exc
    for record in records:
        for prev, nxt in zip(record.words, record.words[1:]):
            if nxt.start < prev.end - 1e-9:
                raise ParseError(f"{record.utt_id}: transcript words overlap")
    return records
