"""Random (distorted word, word) pairs for learning the edit-distance surrogate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..metrics import edit_distance
from ..text import DEFAULT_CORPUS, Alphabet


@dataclass
class StringGenConfig:
    corpus: list[str] = field(default_factory=lambda: list(DEFAULT_CORPUS))
    b: int = 4
    letters: str = Alphabet().letters
    length: int = 8
    seed: int = 0

    def __post_init__(self):
        if not self.corpus:
            raise ValueError("corpus is empty")
        if not 0 < self.b <= self.length:
            raise ValueError(f"need 0 < b <= length, got b={self.b}, length={self.length}")
        too_long = [w for w in self.corpus if len(w) > self.length]
        if too_long:
            raise ValueError(f"corpus words longer than {self.length}: {too_long[:5]}")
        self.alphabet.ids("".join(self.corpus))

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.letters)


def apply_edit(word: str, kind: str, pos: int, symbol: str = "") -> str:
    if kind == "sub":
        return word[:pos] + symbol + word[pos + 1 :]
    if kind == "ins":
        return word[:pos] + symbol + word[pos:]
    if kind == "del":
        return word[:pos] + word[pos + 1 :]
    raise ValueError(f"unknown edit {kind!r}")


def random_edit(word: str, letters: str, max_len: int, rng: np.random.Generator) -> str:
    """One random insertion, deletion or substitution that keeps the length in [0, max_len]."""
    kinds = []
    if word:
        kinds += ["sub", "del"]
    if len(word) < max_len:
        kinds.append("ins")
    kind = kinds[rng.integers(len(kinds))]
    if kind == "ins":
        return apply_edit(word, kind, int(rng.integers(len(word) + 1)), letters[rng.integers(len(letters))])
    pos = int(rng.integers(len(word)))
    if kind == "del":
        return apply_edit(word, kind, pos)
    others = letters.replace(word[pos], "")
    return apply_edit(word, kind, pos, others[rng.integers(len(others))])


def sample_distortion(cfg: StringGenConfig, rng: np.random.Generator) -> tuple[str, str, int, int]:
    """Draw ``(distorted, word, e, d)``: d ~ U{0..b} requested edits, e the true edit distance."""
    d = int(rng.integers(cfg.b + 1))
    word = cfg.corpus[rng.integers(len(cfg.corpus))]
    z = word
    for _ in range(d):
        z = random_edit(z, cfg.letters, cfg.length, rng)
    return z, word, edit_distance(z, word), d


def gen_string_pair(cfg: StringGenConfig, rng: np.random.Generator):
    """One-hot encodings of a distorted word and its source, and their edit distance."""
    z, y, e, _ = sample_distortion(cfg, rng)
    a = cfg.alphabet
    return a.encode(z, cfg.length), a.encode(y, cfg.length), e


class StringPairSource:
    """Batches of generated string pairs; counts how many batches it produced."""

    def __init__(self, cfg: StringGenConfig, seed: int | None = None):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed if seed is None else seed)
        self.calls = 0

    def batch(self, n: int):
        self.calls += 1
        zs, ys, es = [], [], []
        for _ in range(n):
            z, y, e, _ = sample_distortion(self.cfg, self.rng)
            zs.append(z)
            ys.append(y)
            es.append(e)
        a = self.cfg.alphabet
        return a.encode_batch(zs, self.cfg.length), a.encode_batch(ys, self.cfg.length), np.array(es, dtype=np.float64)
