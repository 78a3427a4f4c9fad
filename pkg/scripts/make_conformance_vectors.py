#!/usr/bin/env python3
"""Regenerate the scorer-protocol conformance vectors under vectors/.

The expected responses encode the stub scoring contract: for a request whose
WAV file has bytes B,

    score = round(int.from_bytes(sha256(B).digest()[:8], "big") / 2**64, 6)

and the response line is the compact JSON object {"id": ..., "score": ...}
(UTF-8, no spaces, one per line).  Any adapter's stub mode must reproduce
these bytes exactly.
"""

import hashlib
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from spoofmap.injector import synthesize_voice_like
from spoofmap.wav_io import write_wav


def stub_score(wav_bytes: bytes) -> float:
    digest = hashlib.sha256(wav_bytes).digest()
    return round(int.from_bytes(digest[:8], "big") / 2**64, 6)


def main() -> int:
    vectors_dir = Path(__file__).resolve().parents[1] / "vectors"
    audio_dir = vectors_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)

    requests = []
    responses = []
    for i in range(10):
        name = f"v{i:02d}.wav"
        wav_path = audio_dir / name
        write_wav(wav_path, synthesize_voice_like(0.2, sample_rate=16000, seed=1000 + i))
        requests.append({"id": f"vec{i:02d}", "audio_path": f"audio/{name}"})
        responses.append({"id": f"vec{i:02d}", "score": stub_score(wav_path.read_bytes())})

    (vectors_dir / "requests.jsonl").write_text(
        "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in requests), "utf-8"
    )
    (vectors_dir / "expected_responses.jsonl").write_text(
        "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in responses), "utf-8"
    )
    print(f"wrote 10 vectors into {vectors_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
