import json
import struct

import numpy as np
import pytest


def write_wav_pcm16(path, samples, rate=16000):
    payload = (np.clip(np.asarray(samples), -1, 1) * 32767).astype("<i2").tobytes()
    fmt = struct.pack("<HHIIHH", 1, 1, rate, rate * 2, 2, 16)
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(payload)) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
        fh.write(b"data" + struct.pack("<I", len(payload)) + payload)


@pytest.fixture
def tone_wav(tmp_path):
    rate = 16000
    t = np.arange(rate * 4) / rate
    path = tmp_path / "tone.wav"
    write_wav_pcm16(path, 0.3 * np.sin(2 * np.pi * 220 * t), rate)
    return path


def request_line(req_id, path, start, end):
    return (
        json.dumps({"id": req_id, "audio_path": str(path), "start": start, "end": end})
        + "\n"
    )
