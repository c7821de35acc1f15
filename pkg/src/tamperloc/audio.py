"""Mono waveform loading, slicing, and measurement.

Reads PCM RIFF/WAV files (8/16/24/32-bit integer and 32-bit float),
averages multi-channel input down to mono, and resamples by linear
interpolation. The canonical internal rate is 16 kHz.

Index conventions, fixed for determinism:
  * window start sample = round-half-up(start * rate)
  * window length in samples = floor(dur * rate)
Out-of-range reads raise; callers clip their intervals first.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBufferError, RangeError, UnsupportedFormatError

DEFAULT_SAMPLE_RATE = 16000

_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioBuffer:
    """Immutable mono waveform: float64 samples nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer holds mono audio (1-D array)")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def length(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return self.length / self.sample_rate


def _decode_pcm(data: bytes, bits: int, fmt_tag: int) -> np.ndarray:
    if fmt_tag == _WAVE_FORMAT_IEEE_FLOAT:
        if bits == 32:
            return np.frombuffer(data, dtype="<f4").astype(np.float64)
        if bits == 64:
            return np.frombuffer(data, dtype="<f8").astype(np.float64)
        raise UnsupportedFormatError(f"unsupported float width: {bits} bits")
    if fmt_tag != _WAVE_FORMAT_PCM:
        raise UnsupportedFormatError(f"unsupported WAV format tag {fmt_tag}")
    if bits == 8:
        raw = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
        return (raw - 128.0) / 128.0
    if bits == 16:
        return np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    if bits == 24:
        raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3)
        as_int = (
            raw[:, 0].astype(np.int32)
            | (raw[:, 1].astype(np.int32) << 8)
            | (raw[:, 2].astype(np.int32) << 16)
        )
        as_int = np.where(as_int >= 1 << 23, as_int - (1 << 24), as_int)
        return as_int.astype(np.float64) / float(1 << 23)
    if bits == 32:
        return np.frombuffer(data, dtype="<i4").astype(np.float64) / float(1 << 31)
    raise UnsupportedFormatError(f"unsupported PCM width: {bits} bits")


def _read_wav(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise UnsupportedFormatError(f"{path}: not a RIFF/WAVE file")
        fmt = None
        data = None
        while True:
            chunk_header = fh.read(8)
            if len(chunk_header) < 8:
                break
            chunk_id, size = struct.unpack("<4sI", chunk_header)
            payload = fh.read(size)
            if len(payload) < size:
                raise UnsupportedFormatError(f"{path}: truncated chunk {chunk_id!r}")
            if size % 2:
                fh.read(1)  # chunks are word-aligned
            if chunk_id == b"fmt ":
                fmt = payload
            elif chunk_id == b"data":
                data = payload
        if fmt is None or data is None:
            raise UnsupportedFormatError(f"{path}: missing fmt or data chunk")

    fmt_tag, n_channels, rate, _byte_rate, block_align, bits = struct.unpack(
        "<HHIIHH", fmt[:16]
    )
    if fmt_tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise UnsupportedFormatError("extensible fmt chunk too short")
        # sub-format GUID starts with the ordinary format tag
        fmt_tag = struct.unpack("<H", fmt[24:26])[0]
    if n_channels < 1:
        raise UnsupportedFormatError("zero channels")
    usable = len(data) - len(data) % block_align if block_align else len(data)
    samples = _decode_pcm(data[:usable], bits, fmt_tag)
    if n_channels > 1:
        samples = samples[: len(samples) - len(samples) % n_channels]
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    return samples, rate


def resample_linear(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    """Linear-interpolation resampler. Lower fidelity than a polyphase
    filter, but deterministic and adequate for energy/scoring use."""
    if rate == target_rate or len(samples) == 0:
        return np.asarray(samples, dtype=np.float64)
    n_out = int(round(len(samples) * target_rate / rate))
    positions = np.arange(n_out, dtype=np.float64) * (rate / target_rate)
    return np.interp(positions, np.arange(len(samples), dtype=np.float64), samples)


def load_audio(path, target_rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    """Load a PCM WAV file as a mono buffer at ``target_rate``."""
    samples, rate = _read_wav(path)
    return AudioBuffer(resample_linear(samples, rate, target_rate), target_rate)


def save_wav(buf: AudioBuffer, path, encoding: str = "float32") -> None:
    """Write a mono WAV file. ``float32`` preserves samples bit-exactly
    (after the float64 -> float32 cast); ``pcm16`` quantizes."""
    if encoding == "float32":
        payload = buf.samples.astype("<f4").tobytes()
        fmt_tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    elif encoding == "pcm16":
        clipped = np.clip(buf.samples, -1.0, 1.0)
        payload = (np.round(clipped * 32767.0)).astype("<i2").tobytes()
        fmt_tag, bits = _WAVE_FORMAT_PCM, 16
    else:
        raise UnsupportedFormatError(f"unsupported encoding {encoding!r}")
    block_align = bits // 8
    byte_rate = buf.sample_rate * block_align
    fmt = struct.pack("<HHIIHH", fmt_tag, 1, buf.sample_rate, byte_rate, block_align, bits)
    with open(path, "wb") as fh:
        fh.write(b"RIFF")
        fh.write(struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(payload)))
        fh.write(b"WAVE")
        fh.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
        fh.write(b"data" + struct.pack("<I", len(payload)) + payload)
        if len(payload) % 2:
            fh.write(b"\x00")


def sample_index(t: float, rate: int) -> int:
    """Round-half-up mapping from seconds to a sample index."""
    return int(math.floor(t * rate + 0.5))


def extract_window(buf: AudioBuffer, start: float, dur: float) -> AudioBuffer:
    """Slice ``floor(dur * rate)`` samples starting at ``round(start * rate)``.

    Raises RangeError when the window exceeds the buffer (beyond a
    half-sample tolerance at the right edge).
    """
    if start < 0:
        raise RangeError(f"window start {start} < 0")
    rate = buf.sample_rate
    i0 = sample_index(start, rate)
    n = int(math.floor(dur * rate))
    if i0 > buf.length:
        raise RangeError(f"window start {start}s is past the buffer end")
    if i0 + n > buf.length:
        if start + dur <= buf.duration + 0.5 / rate:
            n = buf.length - i0  # float dust at the right edge
        else:
            raise RangeError(
                f"window ({start}, {start + dur}) exceeds buffer duration {buf.duration}"
            )
    return AudioBuffer(buf.samples[i0 : i0 + n].copy(), rate)


def rms(buf: AudioBuffer) -> float:
    """Root-mean-square amplitude."""
    if buf.length == 0:
        raise EmptyBufferError("rms of an empty buffer")
    return float(np.sqrt(np.mean(np.square(buf.samples))))
