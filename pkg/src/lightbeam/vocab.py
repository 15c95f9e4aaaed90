"""Token vocabulary with reserved blank and word-boundary tokens."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError

BLANK_TOKEN = "<blank>"
SPACE_TOKEN = "<sp>"


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token inventory of the acoustic model output layer.

    ``blank_id`` indexes the CTC blank, ``space_id`` the word-boundary
    token; every other index is a phoneme.
    """

    tokens: tuple[str, ...]
    blank_id: int
    space_id: int

    def __post_init__(self):
        if len(self.tokens) < 3:
            raise FormatError("vocabulary needs at least one phoneme plus blank and space")
        if len(set(self.tokens)) != len(self.tokens):
            raise FormatError("vocabulary tokens must be unique")
        if any(not t for t in self.tokens):
            raise FormatError("vocabulary tokens must be non-empty")
        n = len(self.tokens)
        if not (0 <= self.blank_id < n and 0 <= self.space_id < n):
            raise FormatError("blank_id/space_id out of range")
        if self.blank_id == self.space_id:
            raise FormatError("blank_id and space_id must differ")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def phoneme_ids(self) -> list[int]:
        return [i for i in range(len(self.tokens)) if i not in (self.blank_id, self.space_id)]

    def index(self, token: str) -> int:
        try:
            return self.tokens.index(token)
        except ValueError:
            raise KeyError(f"unknown token {token!r}") from None


def load_vocab(path: str | Path) -> Vocabulary:
    """Load a vocabulary file, one token per line.

    The file must contain the reserved tokens ``<blank>`` and ``<sp>``;
    their line positions become ``blank_id`` and ``space_id``.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    tokens = [line.strip() for line in lines if line.strip()]
    seen: set[str] = set()
    for i, tok in enumerate(tokens):
        if tok in seen:
            raise FormatError(f"{path}: duplicate token {tok!r} at line {i + 1}")
        seen.add(tok)
    if BLANK_TOKEN not in seen:
        raise FormatError(f"{path}: missing reserved token {BLANK_TOKEN!r}")
    if SPACE_TOKEN not in seen:
        raise FormatError(f"{path}: missing reserved token {SPACE_TOKEN!r}")
    return Vocabulary(
        tokens=tuple(tokens),
        blank_id=tokens.index(BLANK_TOKEN),
        space_id=tokens.index(SPACE_TOKEN),
    )


def save_vocab(path: str | Path, vocab: Vocabulary) -> None:
    Path(path).write_text("\n".join(vocab.tokens) + "\n", encoding="utf-8")
