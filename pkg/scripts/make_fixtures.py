#!/usr/bin/env python3
"""Generate a self-contained synthetic benchmark: carrier WAVs with
word-level transcripts, plus splice-tampered variant families and their
ground-truth manifest.

    python scripts/make_fixtures.py --out-dir data/fixtures --n-carriers 8

The output directory ends up with carriers/, tampered WAVs, manifest.jsonl
(real + fake records), transcripts.jsonl, and provenance.jsonl, ready for
`tamperloc localize` / `tamperloc evaluate`.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from tamperloc import annotations as ann
from tamperloc.audio import AudioBuffer, save_wav
from tamperloc.splice import SpliceConfig, SyntheticSource, WordToken, synthesize_family


def speechlike_carrier(rng, dur, rate):
    """Harmonic tone with slow amplitude modulation over a noise floor."""
    t = np.arange(round(dur * rate)) / rate
    f0 = rng.uniform(110, 200)
    signal = np.zeros_like(t)
    for harmonic, weight in ((1, 1.0), (2, 0.5), (3, 0.25)):
        signal += weight * np.sin(2 * np.pi * f0 * harmonic * t + rng.uniform(0, np.pi))
    envelope = 0.55 + 0.45 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t)
    signal = 0.25 * envelope * signal / np.max(np.abs(signal))
    signal += 0.005 * rng.standard_normal(len(t))
    return AudioBuffer(np.clip(signal, -1, 1), rate)


def random_transcript(rng, dur):
    words, t, index = [], 0.6, 0
    while t < dur - 1.0:
        word_dur = float(rng.uniform(0.18, 0.45))
        words.append(WordToken(f"tok{index:03d}", t, t + word_dur, index))
        t += word_dur + float(rng.uniform(0.08, 0.35))
        index += 1
    return words


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--n-carriers", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sample-rate", type=int, default=16000)
    parser.add_argument("--min-dur", type=float, default=6.0)
    parser.add_argument("--max-dur", type=float, default=14.0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    out_dir = Path(args.out_dir)
    carrier_dir = out_dir / "carriers"
    carrier_dir.mkdir(parents=True, exist_ok=True)

    cfg = SpliceConfig()
    records = []
    transcript_lines = []
    provenance = []
    for i in range(args.n_carriers):
        dur = float(rng.uniform(args.min_dur, args.max_dur))
        carrier = speechlike_carrier(rng, dur, args.sample_rate)
        words = random_transcript(rng, carrier.duration)
        utt_id = f"carrier{i:03d}"
        wav_path = carrier_dir / f"{utt_id}.wav"
        save_wav(carrier, wav_path)
        transcript_lines.append(
            {
                "utt_id": utt_id,
                "audio_path": str(wav_path),
                "words": [{"text": w.text, "start": w.start, "end": w.end} for w in words],
            }
        )
        records.append(
            ann.UtteranceRecord(
                utt_id,
                str(wav_path),
                carrier.duration,
                "other",
                "real",
                ann.validate_segment_set([], carrier.duration, require_disjoint=True),
            )
        )
        outcomes = synthesize_family(
            carrier,
            words,
            cfg,
            source_factory=lambda s: SyntheticSource(s),
            seed=args.seed * 1000 + i * 10,
            utt_id=utt_id,
            audio_path_for=lambda n, utt_id=utt_id: str(out_dir / f"{utt_id}_fake{n}w.wav"),
        )
        for outcome in outcomes:
            save_wav(outcome.audio, outcome.record.audio_path)
            records.append(outcome.record)
            provenance.append(outcome.provenance)
        print(f"{utt_id}: {carrier.duration:.1f}s, {len(words)} words, {len(outcomes)} variants")

    ann.write_manifest(records, out_dir / "manifest.jsonl")
    with open(out_dir / "transcripts.jsonl", "w", encoding="utf-8") as fh:
        for line in transcript_lines:
            fh.write(json.dumps(line) + "\n")
    with open(out_dir / "provenance.jsonl", "w", encoding="utf-8") as fh:
        for line in provenance:
            fh.write(json.dumps(line) + "\n")
    print(f"wrote {len(records)} records to {out_dir / 'manifest.jsonl'}")


if __name__ == "__main__":
    main()
