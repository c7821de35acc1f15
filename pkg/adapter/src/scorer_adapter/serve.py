"""Protocol loop: line-delimited JSON requests on stdin, responses on stdout.

    request   {"id": int, "audio_path": str, "start": float, "end": float}
    response  {"id": int, "score": float}
    error     {"id": int, "error": str}     (id -1 when the line had none)

A bad request produces a per-id error response and the loop continues;
EOF on stdin ends the loop cleanly. Windows shorter than the model's
minimum receptive field are zero-padded symmetrically before scoring.
"""

from __future__ import annotations

import json
import select
from dataclasses import dataclass

from .audioio import AudioError, load_window, pad_to_length


@dataclass
class AdapterConfig:
    model_spec: str
    device: str = "cpu"
    batch_size: int = 1
    sample_rate: int = 16000
    min_receptive_sec: float = 0.25
    fake_class_index: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class RequestError(Exception):
    def __init__(self, req_id, message):
        self.req_id = req_id
        super().__init__(message)


def _parse_request(raw: str):
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise RequestError(-1, f"malformed request line: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise RequestError(-1, "request must be a JSON object")
    req_id = obj.get("id", -1)
    if not isinstance(req_id, int) or isinstance(req_id, bool):
        raise RequestError(-1, "request id must be an integer")
    try:
        path = obj["audio_path"]
        start = float(obj["start"])
        end = float(obj["end"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RequestError(req_id, f"bad request fields: {exc}") from exc
    if not (0 <= start < end):
        raise RequestError(req_id, f"bad window ({start}, {end})")
    return req_id, path, start, end


def _gather_batch(stream, batch_size: int) -> list[str]:
    """Block for one line, then greedily take already-buffered lines."""
    first = stream.readline()
    if not first:
        return []
    lines = [first]
    while len(lines) < batch_size:
        ready, _, _ = select.select([stream], [], [], 0)
        if not ready:
            break
        line = stream.readline()
        if not line:
            break
        lines.append(line)
    return lines


def serve(model, config: AdapterConfig, stdin, stdout) -> int:
    """Run the loop until EOF. Returns the process exit code (0)."""
    min_samples = int(round(config.min_receptive_sec * config.sample_rate))

    def respond(payload: dict):
        stdout.write(json.dumps(payload) + "\n")
        stdout.flush()

    while True:
        batch = _gather_batch(stdin, config.batch_size)
        if not batch:
            return 0
        pending: list[tuple[int, object]] = []  # (id, window)
        for raw in batch:
            raw = raw.strip()
            if not raw:
                continue
            try:
                req_id, path, start, end = _parse_request(raw)
                if model.needs_audio:
                    window = load_window(path, start, end, config.sample_rate)
                    if len(window) == 0:
                        raise AudioError(f"empty window ({start}, {end}) in {path}")
                    window = pad_to_length(window, min_samples)
                else:
                    window = None
                pending.append((req_id, window))
            except RequestError as exc:
                respond({"id": exc.req_id, "error": str(exc)})
            except (OSError, AudioError) as exc:
                respond({"id": req_id, "error": str(exc)})
        if not pending:
            continue
        try:
            scores = model.score_batch([w for _, w in pending])
        except Exception as exc:  # per-batch failure stays per-request
            for req_id, _ in pending:
                respond({"id": req_id, "error": f"scoring failed: {exc}"})
            continue
        for (req_id, _), score in zip(pending, scores):
            respond({"id": req_id, "score": max(0.0, min(1.0, float(score)))})
