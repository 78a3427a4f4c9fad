"""Scoring backends: the deterministic stub and the real-model hook.

Stub contract (shared with the toolkit's conformance vectors): for a WAV
file with bytes B,

    score = round(int.from_bytes(sha256(B).digest()[:8], "big") / 2**64, 6)

so identical file bytes always yield identical scores, with no model
weights involved.
"""

from __future__ import annotations

import hashlib
import importlib
from pathlib import Path
from typing import Callable

Scorer = Callable[[str], float]


def _check_wav(path: str) -> None:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"audio file not found: {path}")
    header = p.open("rb").read(12)
    if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
        raise ValueError(f"not a RIFF/WAVE file: {path}")


def stub_score(path: str) -> float:
    """Hash-derived spoof probability in [0, 1]; pure in the file bytes."""
    _check_wav(path)
    digest = hashlib.sha256(Path(path).read_bytes()).digest()
    return round(int.from_bytes(digest[:8], "big") / 2**64, 6)


def load_model_scorer(model_id: str, device: str = "cpu") -> Scorer:
    """Resolve a real scoring backend from a ``module:callable`` spec.

    The callable receives (wav_path, device) and returns a spoof
    probability.  Classifier weights are deliberately not bundled; any
    raw-waveform deepfake detector can be exposed this way.
    """
    module_name, _, attr = model_id.partition(":")
    if not module_name or not attr:
        raise ValueError(f"model id must look like 'module:callable', got {model_id!r}")
    module = importlib.import_module(module_name)
    fn = getattr(module, attr)

    def scorer(path: str) -> float:
        _check_wav(path)
        value = float(fn(path, device))
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"model returned a score outside [0, 1]: {value}")
        return value

    return scorer
