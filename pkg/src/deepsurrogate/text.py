"""Strings as |A| x L per-position distribution matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAD = "-"
DEFAULT_LETTERS = "abcdefghijk"

# words spelled with the default letters a..k, at most 8 long
DEFAULT_CORPUS = (
    "a ace aged bad badge bag bake baked bead beach bed beef beg bid bide big bike cab cabbage "
    "cafe cage cake caked chef chic chide chief dab dad deaf deck decked deed died dig each edge "
    "egg face faced fade faded feed fig gab gag hack hacked had hag head headed heed hid hide high "
    "ice iced jab jack jade jag keg kick kicked kid idea aide fee gig hike hiked jig beige"
).split()


@dataclass(frozen=True)
class Alphabet:
    """Symbol set with the pad/blank symbol at index 0."""

    letters: str = DEFAULT_LETTERS
    pad: str = PAD

    @property
    def symbols(self) -> str:
        return self.pad + self.letters

    @property
    def size(self) -> int:
        return len(self.letters) + 1

    def ids(self, text: str) -> list[int]:
        try:
            return [self.letters.index(ch) + 1 for ch in text]
        except ValueError:
            bad = sorted(set(text) - set(self.letters))
            raise ValueError(f"symbols {bad} not in alphabet {self.letters!r}") from None

    def text(self, ids) -> str:
        return "".join(self.letters[i - 1] for i in ids if i != 0)

    def encode(self, text: str, length: int) -> np.ndarray:
        """One-hot |A| x L matrix; positions past the end hold the pad symbol."""
        if len(text) > length:
            raise ValueError(f"{text!r} is longer than {length}")
        ids = self.ids(text) + [0] * (length - len(text))
        out = np.zeros((self.size, length))
        out[ids, np.arange(length)] = 1.0
        return out

    def encode_batch(self, texts, length: int) -> np.ndarray:
        return np.stack([self.encode(t, length) for t in texts]) if texts else np.zeros((0, self.size, length))

    def decode(self, matrix: np.ndarray) -> str:
        """Argmax per column, pad symbols dropped."""
        return self.text(np.asarray(matrix).argmax(axis=0).tolist())

    def decode_batch(self, batch: np.ndarray) -> list[str]:
        ids = np.asarray(batch).argmax(axis=1)
        return [self.text(row) for row in ids.tolist()]
