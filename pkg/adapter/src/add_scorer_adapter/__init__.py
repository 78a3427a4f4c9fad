"""Reference scorer adapter speaking the add-scorer JSONL protocol."""

from .scoring import load_model_scorer, stub_score
from .server import serve

__version__ = "0.1.0"

__all__ = ["load_model_scorer", "serve", "stub_score"]
