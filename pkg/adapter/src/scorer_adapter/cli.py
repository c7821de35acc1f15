"""Entry point: load the configured model and serve the wire protocol.

    scorer-adapter --model stub:0.5
    scorer-adapter --model transformers:some/audio-deepfake-checkpoint --device cpu

Model id and device may also come from SCORER_ADAPTER_MODEL and
SCORER_ADAPTER_DEVICE. Exit codes: 0 clean EOF, 2 usage error, 3 fatal
model-load failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .models import ModelLoadError, build_model
from .serve import AdapterConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scorer-adapter", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--model",
        default=os.environ.get("SCORER_ADAPTER_MODEL"),
        help="stub:P or transformers:MODEL_ID (env: SCORER_ADAPTER_MODEL)",
    )
    parser.add_argument(
        "--device",
        default=os.environ.get("SCORER_ADAPTER_DEVICE", "cpu"),
        help="torch device for the transformers backend (env: SCORER_ADAPTER_DEVICE)",
    )
    parser.add_argument("--batch-size", type=int, default=1)
    parser.add_argument("--sample-rate", type=int, default=16000)
    parser.add_argument(
        "--min-receptive", type=float, default=0.25,
        help="windows shorter than this many seconds are zero-padded symmetrically",
    )
    parser.add_argument(
        "--fake-class-index", type=int, default=None,
        help="logit index of the fake class (default: guess from labels, else 1)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not args.model:
        print("scorer-adapter: --model is required", file=sys.stderr)
        return 2
    config = AdapterConfig(
        model_spec=args.model,
        device=args.device,
        batch_size=args.batch_size,
        sample_rate=args.sample_rate,
        min_receptive_sec=args.min_receptive,
        fake_class_index=args.fake_class_index,
    )
    try:
        model = build_model(
            config.model_spec,
            device=config.device,
            sample_rate=config.sample_rate,
            fake_class_index=config.fake_class_index,
        )
    except ModelLoadError as exc:
        print(f"scorer-adapter: {exc}", file=sys.stderr)
        return 3
    return serve(model, config, sys.stdin, sys.stdout)


if __name__ == "__main__":
    raise SystemExit(main())
