"""Action commands and their embedding.

The default encoder is a learned per-command embedding table over a closed
vocabulary. Anything exposing ``embed(text) -> np.ndarray`` and ``dim`` can
be plugged in instead (e.g. a pretrained sentence encoder) to handle free
text.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
import torch
from torch import nn

from ..errors import VocabularyError

OOV_ID = -1


@dataclass(frozen=True)
class Vocabulary:
    """Closed, ordered set of command strings."""

    words: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.words)) != len(self.words):
            raise VocabularyError("vocabulary contains duplicates")

    @classmethod
    def from_labels(cls, labels) -> "Vocabulary":
        return cls(tuple(sorted(set(labels))))

    def __len__(self) -> int:
        return len(self.words)

    def id_of(self, text: str) -> int:
        try:
            return self.words.index(text)
        except ValueError:
            return OOV_ID

    def __contains__(self, text: str) -> bool:
        return text in self.words


@dataclass(frozen=True)
class ActionCommand:
    """A user-facing action prompt, e.g. "high-five"."""

    text: str
    id: int = OOV_ID

    def __post_init__(self):
        if not self.text:
            raise VocabularyError("command text must be nonempty")

    @property
    def in_vocabulary(self) -> bool:
        return self.id != OOV_ID


def make_command(text: str, vocab: Vocabulary) -> ActionCommand:
    return ActionCommand(text=text, id=vocab.id_of(text))


@dataclass(frozen=True)
class CommandEmbedding:
    vector: np.ndarray  # (d_c,)

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise VocabularyError("command embedding must be a finite vector")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@runtime_checkable
class TextEncoder(Protocol):
    """Plug-in interface for external text encoders."""

    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class CommandTable(nn.Module):
    """Learned embedding table over a closed vocabulary.

    Rows are checked pairwise-distinct at init so distinct commands can never
    collide before training even begins.
    """

    def __init__(self, vocab: Vocabulary, dim: int, seed: int = 0):
        super().__init__()
        self.vocab = vocab
        self.dim = dim
        gen = torch.Generator().manual_seed(seed)
        weight = torch.randn(len(vocab), dim, generator=gen) * 0.1
        for i in range(len(vocab)):
            for j in range(i + 1, len(vocab)):
                if torch.allclose(weight[i], weight[j]):
                    weight[j] = weight[j] + 0.01 * (j + 1)
        self.table = nn.Embedding(len(vocab), dim, _weight=weight)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        return self.table(ids)

    def embed(self, text: str) -> np.ndarray:
        i = self.vocab.id_of(text)
        if i == OOV_ID:
            raise VocabularyError(
                f"command {text!r} is out of vocabulary; known: {self.vocab.words}"
            )
        with torch.no_grad():
            return self.table.weight[i].double().numpy()


def embed_command(cmd: ActionCommand, encoder) -> CommandEmbedding:
    """Embed a command with the table encoder or any TextEncoder plug-in."""
    return CommandEmbedding(vector=np.asarray(encoder.embed(cmd.text), dtype=np.float64))
