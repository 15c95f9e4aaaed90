"""Raw logit matrices: binary/JSON loading and acoustic log-softmax scaling."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataValueError, FormatError, ShapeError
from .vocab import Vocabulary

LBLT_MAGIC = b"LBLT"
LBLT_VERSION = 1


@dataclass(frozen=True)
class RawLogits:
    """Unnormalized encoder scores, one row per encoder frame."""

    frames: np.ndarray  # (T, V) float32
    frame_duration_ms: float

    def __post_init__(self):
        if self.frames.ndim != 2:
            raise ShapeError(f"logits must be 2-D, got shape {self.frames.shape}")
        if not np.isfinite(self.frames).all():
            raise DataValueError("logits contain non-finite values")
        if self.frame_duration_ms <= 0:
            raise DataValueError("frame_duration_ms must be positive")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class LogProbMatrix:
    """Acoustically scaled log-probabilities: ``alpha * log_softmax(raw)``.

    Each row satisfies ``sum_v exp(frames[t, v] / alpha) == 1``.
    """

    frames: np.ndarray  # (T, V) float64
    acoustic_scale: float
    frame_duration_ms: float

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.frames.shape[1]


def save_logits(path: str | Path, raw: RawLogits) -> None:
    """Write the LBLT binary format (little-endian, float32 payload)."""
    frames = np.ascontiguousarray(raw.frames, dtype="<f4")
    t, v = frames.shape
    with open(path, "wb") as fh:
        fh.write(LBLT_MAGIC)
        fh.write(struct.pack("<IIIf", LBLT_VERSION, t, v, raw.frame_duration_ms))
        fh.write(frames.tobytes())


def load_logits(path: str | Path, vocab: Vocabulary) -> RawLogits:
    """Load logits from an LBLT binary file or the JSON test format.

    The stored vocabulary width must equal ``len(vocab)``.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == LBLT_MAGIC:
            raw = _read_lblt(fh, path)
        else:
            raw = _read_json(path)
    if raw.frames.shape[1] != len(vocab):
        raise ShapeError(
            f"{path}: stored vocabulary size {raw.frames.shape[1]} != expected {len(vocab)}"
        )
    return raw


def _read_lblt(fh, path: Path) -> RawLogits:
    header = fh.read(16)
    if len(header) != 16:
        raise FormatError(f"{path}: truncated LBLT header")
    version, t, v, frame_ms = struct.unpack("<IIIf", header)
    if version != LBLT_VERSION:
        raise FormatError(f"{path}: unsupported LBLT version {version}")
    payload = fh.read(4 * t * v)
    if len(payload) != 4 * t * v:
        raise FormatError(f"{path}: truncated LBLT payload")
    frames = np.frombuffer(payload, dtype="<f4").reshape(t, v)
    if not np.isfinite(frames).all():
        raise DataValueError(f"{path}: non-finite logit value")
    return RawLogits(frames=frames.copy(), frame_duration_ms=float(frame_ms))


def _read_json(path: Path) -> RawLogits:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: neither LBLT magic nor valid JSON ({exc})") from exc
    if not isinstance(obj, dict) or "logits" not in obj or "frame_duration_ms" not in obj:
        raise FormatError(f"{path}: JSON logits need 'frame_duration_ms' and 'logits' keys")
    frames = np.asarray(obj["logits"], dtype=np.float32)
    if frames.ndim != 2:
        raise FormatError(f"{path}: 'logits' must be a list of equal-length rows")
    if not np.isfinite(frames).all():
        raise DataValueError(f"{path}: non-finite logit value")
    return RawLogits(frames=frames, frame_duration_ms=float(obj["frame_duration_ms"]))


def scale_log_softmax(raw: RawLogits, acoustic_scale: float) -> LogProbMatrix:
    """Row-wise log-softmax followed by multiplication with the acoustic scale."""
    if acoustic_scale <= 0:
        raise ConfigError(f"acoustic scale must be positive, got {acoustic_scale}")
    x = raw.frames.astype(np.float64)
    m = x.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(x - m).sum(axis=1, keepdims=True))
    return LogProbMatrix(
        frames=acoustic_scale * (x - lse),
        acoustic_scale=float(acoustic_scale),
        frame_duration_ms=raw.frame_duration_ms,
    )
