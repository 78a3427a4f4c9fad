"""The add-scorer JSONL session: one handshake line, then one JSON response
per request line, strictly sequential, until stdin closes.

Wire rules: UTF-8, one compact JSON object per line ("," and ":" separators,
no padding).  A response carries "id" plus exactly one of "score"/"error".
Malformed request lines get an error response quoting the line; the session
continues.
"""

from __future__ import annotations

import json
import sys
from typing import Callable, TextIO

PROTOCOL_NAME = "add-scorer"
PROTOCOL_VERSION = 1


def _emit(stream: TextIO, obj: dict) -> None:
    stream.write(json.dumps(obj, separators=(",", ":")) + "\n")
    stream.flush()


def serve(
    scorer: Callable[[str], float],
    orientation: str = "spoof_high",
    stdin: TextIO | None = None,
    stdout: TextIO | None = None,
) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    _emit(
        stdout,
        {"protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION, "orientation": orientation},
    )
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request is not a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            _emit(stdout, {"id": "", "error": f"malformed request line {line.rstrip()!r}: {exc}"})
            continue
        request_id = str(request.get("id", ""))
        audio_path = request.get("audio_path")
        if not isinstance(audio_path, str):
            _emit(stdout, {"id": request_id, "error": "request carries no audio_path"})
            continue
        try:
            _emit(stdout, {"id": request_id, "score": scorer(audio_path)})
        except Exception as exc:
            _emit(stdout, {"id": request_id, "error": str(exc)})
    return 0


def serve_handshake_error(message: str, stdout: TextIO | None = None) -> int:
    """Report a fatal startup problem in the handshake line and fail."""
    stdout = stdout if stdout is not None else sys.stdout
    _emit(
        stdout,
        {"protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION, "error": message},
    )
    return 1
