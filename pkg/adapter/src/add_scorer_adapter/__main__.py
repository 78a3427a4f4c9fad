"""Command-line entry: stub mode by default, real model via --model-id."""

import argparse
import sys

from .scoring import load_model_scorer, stub_score
from .server import serve, serve_handshake_error


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="add-scorer-adapter")
    parser.add_argument("--stub", action="store_true", help="deterministic hash-derived scores")
    parser.add_argument(
        "--model-id",
        default=None,
        help="real scoring backend as 'module:callable(path, device) -> [0,1]'",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--orientation",
        choices=("spoof_high", "bonafide_high"),
        default="spoof_high",
        help="score orientation reported in the handshake",
    )
    args = parser.parse_args(argv)

    if args.model_id and not args.stub:
        try:
            scorer = load_model_scorer(args.model_id, args.device)
        except Exception as exc:
            return serve_handshake_error(f"model load failed: {exc}")
    else:
        scorer = stub_score
    return serve(scorer, orientation=args.orientation)


if __name__ == "__main__":
    sys.exit(main())
