"""Minimal audio loading for the adapter: PCM16 / float32 WAV, mono
downmix, linear resampling, and [start, end) window slicing.

Kept deliberately self-contained; the adapter talks to the localization
toolkit only over the wire protocol and shares no code with it.
"""

from __future__ import annotations

import struct

import numpy as np


class AudioError(Exception):
    pass


def read_wav(path) -> tuple[np.ndarray, int]:
    """Return (mono float64 samples, sample rate)."""
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            raise AudioError(f"{path}: not a RIFF/WAVE file")
        fmt = data = None
        while True:
            chunk = fh.read(8)
            if len(chunk) < 8:
                break
            cid, size = struct.unpack("<4sI", chunk)
            payload = fh.read(size)
            if size % 2:
                fh.read(1)
            if cid == b"fmt ":
                fmt = payload
            elif cid == b"data":
                data = payload
    if fmt is None or data is None:
        raise AudioError(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _rate_bytes, block, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == 0xFFFE and len(fmt) >= 26:
        tag = struct.unpack("<H", fmt[24:26])[0]
    usable = len(data) - len(data) % block if block else len(data)
    body = data[:usable]
    if tag == 1 and bits == 16:
        samples = np.frombuffer(body, dtype="<i2").astype(np.float64) / 32768.0
    elif tag == 3 and bits == 32:
        samples = np.frombuffer(body, dtype="<f4").astype(np.float64)
    else:
        raise AudioError(f"{path}: unsupported encoding (tag {tag}, {bits} bits)")
    if channels > 1:
        samples = samples[: len(samples) - len(samples) % channels]
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, rate


def resample(samples: np.ndarray, rate: int, target: int) -> np.ndarray:
    if rate == target or len(samples) == 0:
        return samples
    n_out = int(round(len(samples) * target / rate))
    positions = np.arange(n_out) * (rate / target)
    return np.interp(positions, np.arange(len(samples)), samples)


def load_window(path, start: float, end: float, sample_rate: int) -> np.ndarray:
    """Mono samples for [start, end) at ``sample_rate``."""
    if not (0 <= start < end):
        raise AudioError(f"bad window ({start}, {end})")
    samples, rate = read_wav(path)
    mono = resample(samples, rate, sample_rate)
    i0 = int(np.floor(start * sample_rate + 0.5))
    n = int(np.floor((end - start) * sample_rate))
    if i0 >= len(mono):
        raise AudioError(f"window start {start}s beyond file end")
    return mono[i0 : min(len(mono), i0 + n)]


def pad_to_length(window: np.ndarray, min_samples: int) -> np.ndarray:
    """Symmetric zero padding up to the model's minimum receptive field."""
    if len(window) >= min_samples:
        return window
    deficit = min_samples - len(window)
    left = deficit // 2
    return np.pad(window, (left, deficit - left))
