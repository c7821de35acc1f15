import numpy as np
import pytest

from tamperloc.annotations import (
    SegmentSet,
    TimeSegment,
    UtteranceRecord,
    validate_segment_set,
    variant_for_count,
)
from tamperloc.audio import AudioBuffer


def make_segments(pairs, duration=None, disjoint=True) -> SegmentSet:
    return validate_segment_set(
        [TimeSegment(s, e) for s, e in pairs], duration, require_disjoint=disjoint
    )


def make_record(
    utt_id,
    duration,
    pairs=(),
    language="EN",
    audio_path="unused.wav",
) -> UtteranceRecord:
    gt = make_segments(pairs, duration)
    return UtteranceRecord(
        utt_id, audio_path, duration, language, variant_for_count(gt.count), gt
    )


def sine_buffer(freq=440.0, dur=1.0, rate=16000, amplitude=1.0) -> AudioBuffer:
    t = np.arange(round(dur * rate)) / rate
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq * t), rate)


def constant_buffer(value, dur=1.0, rate=16000) -> AudioBuffer:
    return AudioBuffer(np.full(round(dur * rate), float(value)), rate)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_tamper_fixture(
    rng,
    utt_id,
    d_range=(6.0, 12.0),
    dur_range=(0.2, 0.8),
    min_gap=1.5,
    edge_margin=1.0,
    n_max=3,
):
    """Random tampered utterance honoring the recovery-test geometry:
    segments at least ``min_gap`` apart and ``edge_margin`` from either end."""
    duration = float(rng.uniform(*d_range))
    durs = rng.uniform(dur_range[0], dur_range[1], size=n_max)
    n = int(rng.integers(1, n_max + 1))
    while n > 1 and 2 * edge_margin + durs[:n].sum() + min_gap * (n - 1) > duration:
        n -= 1
    slack = duration - (2 * edge_margin + durs[:n].sum() + min_gap * (n - 1))
    cuts = np.sort(rng.uniform(0.0, slack, size=n))
    pairs = []
    for i in range(n):
        start = edge_margin + durs[:i].sum() + min_gap * i + cuts[i]
        pairs.append((float(start), float(start + durs[i])))
    return make_record(utt_id, duration, pairs)
