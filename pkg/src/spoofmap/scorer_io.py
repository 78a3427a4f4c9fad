"""Black-box classifier interface: built-in deterministic scorers for tests
and a JSONL subprocess session for external models.

Wire protocol: the child prints one handshake line
``{"protocol":"add-scorer","version":1,"orientation":"spoof_high"}``, then
answers one JSON object per request line on stdin with one JSON object per
line on stdout.  Requests carry {"id", "audio_path"}; responses carry "id"
plus exactly one of "score" (spoof probability in [0, 1]) or "error".
Sessions end when stdin closes.
"""

from __future__ import annotations

import json
import queue
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import InvalidInputError, ProtocolError, ScorerUnavailableError
from .spectral import StftConfig, Waveform, stft
from .wav_io import write_wav

PROTOCOL_NAME = "add-scorer"
PROTOCOL_VERSION = 1
HANDSHAKE_TIMEOUT_S = 30.0


@dataclass(frozen=True)
class ScorerRequest:
    id: str
    audio_path: str


@dataclass(frozen=True)
class ScorerResponse:
    id: str
    score: float | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        if (self.score is None) == (self.error is None):
            raise InvalidInputError("exactly one of score/error must be present")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise InvalidInputError(f"score must be in [0, 1], got {self.score}")


class Scorer(Protocol):
    """Anything that maps a waveform to a spoof probability in [0, 1]."""

    def score(self, x: Waveform) -> float: ...


def band_to_bins(band_hz: tuple[float, float], sample_rate: int, cfg: StftConfig) -> slice:
    """Bins whose center frequency k*sr/fft_size lies in [f_low, f_high)."""
    f_low, f_high = band_hz
    nyquist = sample_rate / 2.0
    if not 0.0 <= f_low < f_high <= nyquist:
        raise InvalidInputError(f"band {band_hz} must satisfy 0 <= low < high <= {nyquist}")
    hz_per_bin = sample_rate / cfg.fft_size
    lo = int(np.ceil(f_low / hz_per_bin))
    hi = int(np.ceil(f_high / hz_per_bin))
    if hi <= lo:
        raise InvalidInputError(f"band {band_hz} covers no STFT bins")
    return slice(lo, hi)


def band_energy(x: Waveform, band_hz: tuple[float, float], cfg: StftConfig = StftConfig()) -> float:
    """Mean squared STFT magnitude over the band's bins."""
    bins = band_to_bins(band_hz, x.sample_rate, cfg)
    magnitude = stft(x, cfg).magnitude[bins]
    return float(np.mean(magnitude * magnitude))


class DummyBandEnergyScorer:
    """Deterministic test scorer: missing band energy reads as spoof evidence.

    score = clamp01(1 - E_band(x) / ref_energy), so a 20 dB band attenuation
    scores about 0.99.
    """

    def __init__(
        self,
        band_hz: tuple[float, float],
        ref_energy: float,
        stft_cfg: StftConfig = StftConfig(),
    ) -> None:
        if ref_energy <= 0:
            raise InvalidInputError(f"ref_energy must be positive, got {ref_energy}")
        self.band_hz = band_hz
        self.ref_energy = ref_energy
        self.stft_cfg = stft_cfg

    def score(self, x: Waveform) -> float:
        e = band_energy(x, self.band_hz, self.stft_cfg)
        return float(min(1.0, max(0.0, 1.0 - e / self.ref_energy)))


def dummy_band_energy_scorer(
    x: Waveform,
    band_hz: tuple[float, float],
    ref_energy: float,
    stft_cfg: StftConfig = StftConfig(),
) -> float:
    return DummyBandEnergyScorer(band_hz, ref_energy, stft_cfg).score(x)


class _LineReader:
    """Background reader so handshake/response waits can time out."""

    def __init__(self, stream) -> None:
        self._queue: queue.Queue[bytes | None] = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,), daemon=True)
        self._thread.start()

    def _pump(self, stream) -> None:
        for line in stream:
            self._queue.put(line)
        self._queue.put(None)

    def readline(self, timeout: float) -> bytes | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError


class ExternalScorerSession:
    """Single-owner session speaking the JSONL protocol with a child process.

    Requests are strictly sequential: send one line, await one line.
    """

    def __init__(
        self,
        command: Sequence[str],
        handshake_timeout_s: float = HANDSHAKE_TIMEOUT_S,
        response_timeout_s: float = 300.0,
    ) -> None:
        self.command = list(command)
        self.response_timeout_s = response_timeout_s
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as exc:
            raise ScorerUnavailableError(f"cannot start scorer {self.command}: {exc}") from exc
        self._reader = _LineReader(self._proc.stdout)
        self.orientation = self._handshake(handshake_timeout_s)
        self._counter = 0

    def _handshake(self, timeout_s: float) -> str:
        try:
            line = self._reader.readline(timeout_s)
        except TimeoutError:
            self.close()
            raise ScorerUnavailableError(
                f"scorer {self.command} did not complete the handshake within {timeout_s} s"
            )
        if line is None:
            self.close()
            raise ScorerUnavailableError(f"scorer {self.command} exited before the handshake")
        hs = self._parse_line(line)
        if hs.get("error"):
            self.close()
            raise ScorerUnavailableError(f"scorer handshake reported an error: {hs['error']}")
        if hs.get("protocol") != PROTOCOL_NAME or hs.get("version") != PROTOCOL_VERSION:
            self.close()
            raise ProtocolError(f"unexpected handshake line: {line.decode('utf-8', 'replace')!r}")
        orientation = hs.get("orientation", "spoof_high")
        if orientation not in ("spoof_high", "bonafide_high"):
            self.close()
            raise ProtocolError(f"unknown score orientation {orientation!r}")
        return orientation

    @staticmethod
    def _parse_line(line: bytes) -> dict:
        try:
            obj = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"malformed JSON line from scorer: {line!r}") from exc
        if not isinstance(obj, dict):
            raise ProtocolError(f"expected a JSON object from scorer, got: {line!r}")
        return obj

    def score_path(self, request_id: str, audio_path: str | Path) -> ScorerResponse:
        """Send one request and await its response."""
        if self._proc.poll() is not None:
            raise ScorerUnavailableError(f"scorer {self.command} has exited")
        payload = json.dumps(
            {"id": request_id, "audio_path": str(Path(audio_path).absolute())},
            separators=(",", ":"),
        )
        self._proc.stdin.write(payload.encode("utf-8") + b"\n")
        self._proc.stdin.flush()
        try:
            line = self._reader.readline(self.response_timeout_s)
        except TimeoutError:
            raise ScorerUnavailableError(f"scorer timed out answering request {request_id!r}")
        if line is None:
            raise ScorerUnavailableError("scorer closed its output mid-session")
        obj = self._parse_line(line)
        if obj.get("id") != request_id:
            raise ProtocolError(
                f"response id {obj.get('id')!r} does not match request {request_id!r}"
            )
        if "error" in obj:
            return ScorerResponse(id=request_id, error=str(obj["error"]))
        score = obj.get("score")
        if not isinstance(score, (int, float)):
            raise ProtocolError(f"response carries no numeric score: {line!r}")
        score = float(score)
        if self.orientation == "bonafide_high":
            score = 1.0 - score
        return ScorerResponse(id=request_id, score=score)

    def score(self, x: Waveform) -> float:
        """Score a waveform by writing a temporary float32 WAV."""
        self._counter += 1
        request_id = f"wave{self._counter:06d}"
        with tempfile.TemporaryDirectory(prefix="spoofmap_scorer_") as tmp:
            path = Path(tmp) / f"{request_id}.wav"
            write_wav(path, x, fmt="float32")
            response = self.score_path(request_id, path)
        if response.error is not None:
            raise ScorerUnavailableError(f"scorer failed on {request_id}: {response.error}")
        return response.score

    def close(self) -> None:
        if self._proc.stdin and not self._proc.stdin.closed:
            try:
                self._proc.stdin.close()
            except BrokenPipeError:
                pass
        try:
            self._proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self) -> "ExternalScorerSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def external_scorer_session(
    command: Sequence[str], handshake_timeout_s: float = HANDSHAKE_TIMEOUT_S
) -> ExternalScorerSession:
    return ExternalScorerSession(command, handshake_timeout_s=handshake_timeout_s)


def run_conformance(
    command: Sequence[str], vectors_dir: str | Path
) -> tuple[list[bytes], list[bytes]]:
    """Run the shipped request vectors against a scorer command.

    Returns (actual, expected) raw response lines; byte equality is the
    conformance criterion.  Request paths are resolved against the vectors
    directory before sending.
    """
    vectors_dir = Path(vectors_dir)
    requests = [
        json.loads(line)
        for line in (vectors_dir / "requests.jsonl").read_text("utf-8").splitlines()
        if line.strip()
    ]
    expected = [
        line.encode("utf-8")
        for line in (vectors_dir / "expected_responses.jsonl").read_text("utf-8").splitlines()
        if line.strip()
    ]
    with ExternalScorerSession(command) as session:
        actual = []
        for req in requests:
            path = vectors_dir / req["audio_path"]
            payload = json.dumps(
                {"id": req["id"], "audio_path": str(path.absolute())}, separators=(",", ":")
            )
            session._proc.stdin.write(payload.encode("utf-8") + b"\n")
            session._proc.stdin.flush()
            line = session._reader.readline(session.response_timeout_s)
            if line is None:
                raise ScorerUnavailableError("scorer closed its output during conformance run")
            actual.append(line.rstrip(b"\n"))
    return actual, expected
