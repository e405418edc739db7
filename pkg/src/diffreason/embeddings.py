"""Word vectors for node symbols and seeded random vectors for relations.

Node symbols live in a :class:`VocabStore` loaded from a GloVe-style text
file. Relations (edge symbols) and ``*`` template slots get deterministic
random vectors from :func:`random_embedding`, keyed by a seed and a tag.

Random vectors use NumPy's Philox4x32-10 counter-based generator. The
Philox key is the first 16 bytes of SHA-256 over ``"<seed>\\x00<tag>"``,
and components are drawn with ``Generator.standard_normal``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


class VocabularyError(ValueError):
    """Raised for malformed vector files and invalid vocabulary queries."""


class UnknownSymbolError(KeyError):
    """A node symbol has no vector in the vocabulary."""


@dataclass(frozen=True, eq=False)
class VocabStore:
    """Immutable map from words to equal-length, finite vectors."""

    dim: int
    entries: Mapping[str, np.ndarray]
    _words: tuple[str, ...] = field(init=False, repr=False)
    _unit: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim <= 0:
            raise VocabularyError(f"dim must be positive, got {self.dim}")
        frozen = {}
        for word, vec in self.entries.items():
            vec = np.array(vec, dtype=np.float64).reshape(-1)
            if vec.shape != (self.dim,):
                raise VocabularyError(
                    f"vector for {word!r} has length {vec.size}, expected {self.dim}"
                )
            if not np.all(np.isfinite(vec)):
                raise VocabularyError(f"vector for {word!r} has non-finite components")
            vec.flags.writeable = False
            frozen[word] = vec
        object.__setattr__(self, "entries", frozen)
        # sorted order makes nearest_word independent of load order and breaks
        # ties toward the lexicographically smaller word
        words = tuple(sorted(frozen))
        if words:
            mat = np.stack([frozen[w] for w in words])
            norms = np.linalg.norm(mat, axis=1, keepdims=True)
            unit = np.divide(mat, norms, out=np.zeros_like(mat), where=norms > 0)
        else:
            unit = np.zeros((0, self.dim))
        object.__setattr__(self, "_words", words)
        object.__setattr__(self, "_unit", unit)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __getitem__(self, word: str) -> np.ndarray:
        return self.entries[word]

    def words(self) -> list[str]:
        return list(self.entries)

    def merged(self, other: "VocabStore") -> "VocabStore":
        """Entries of both stores; on conflict ``self`` wins."""
        if other.dim != self.dim:
            raise VocabularyError(f"dimension mismatch: {self.dim} vs {other.dim}")
        entries = dict(other.entries)
        entries.update(self.entries)
        return VocabStore(self.dim, entries)


def load_word_vectors(path: str | Path, limit: int | None = None) -> VocabStore:
    """Read a whitespace-separated ``word v1 v2 ...`` file (GloVe text format).

    The dimension is taken from the first line. Duplicate words keep their
    first occurrence. Blank lines are skipped.
    """
    entries: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if limit is not None and len(entries) >= limit:
                break
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            word, fields = parts[0], parts[1:]
            if dim is None:
                dim = len(fields)
                if dim == 0:
                    raise VocabularyError(f"{path}:{lineno}: no vector components")
            if len(fields) != dim:
                raise VocabularyError(
                    f"{path}:{lineno}: ragged line, expected {dim} floats, got {len(fields)}"
                )
            try:
                vec = np.array([float(x) for x in fields])
            except ValueError as exc:
                raise VocabularyError(f"{path}:{lineno}: {exc}") from None
            if word not in entries:
                entries[word] = vec
    if dim is None:
        raise VocabularyError(f"{path}: empty vector file")
    return VocabStore(dim, entries)


def save_word_vectors(store: VocabStore, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in store.entries.items():
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def random_embedding(seed: int, tag: str, dim: int) -> np.ndarray:
    """Deterministic i.i.d. unit-normal vector for ``(seed, tag, dim)``."""
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    digest = hashlib.sha256(f"{int(seed)}\x00{tag}".encode("utf-8")).digest()
    key = int.from_bytes(digest[:16], "little")
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.standard_normal(dim)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise VocabularyError("cosine of a zero-norm vector is undefined")
    return float(min(1.0, max(-1.0, np.dot(a, b) / (na * nb))))


def nearest_word(v: np.ndarray, store: VocabStore) -> tuple[str, float]:
    """Word with the highest cosine to ``v``; ties go to the smaller word."""
    if len(store) == 0:
        raise VocabularyError("nearest_word on an empty vocabulary")
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise VocabularyError("nearest_word of a zero-norm vector is undefined")
    scores = store._unit @ (v / norm)
    idx = int(np.argmax(scores))
    word = store._words[idx]
    return word, cosine(v, store[word])


def relation_store(names: Iterable[str], seed: int, dim: int) -> VocabStore:
    return VocabStore(dim, {name: random_embedding(seed, name, dim) for name in names})


@dataclass(frozen=True, eq=False)
class Lexicon:
    """Node vocabulary plus the separate relation namespace.

    Relations missing from ``relations`` are generated on demand with
    :func:`random_embedding` under ``relation_seed``; use
    :meth:`with_relations` to make them visible to :func:`nearest_word`.
    """

    nodes: VocabStore
    relations: VocabStore
    relation_seed: int = 0

    @property
    def dim(self) -> int:
        return self.nodes.dim

    def __post_init__(self):
        if self.relations.dim != self.nodes.dim:
            raise VocabularyError(
                f"node dim {self.nodes.dim} != relation dim {self.relations.dim}"
            )

    def node_vector(self, name: str) -> np.ndarray:
        try:
            return self.nodes[name]
        except KeyError:
            raise UnknownSymbolError(name) from None

    def relation_vector(self, name: str) -> np.ndarray:
        if name in self.relations:
            return self.relations[name]
        return random_embedding(self.relation_seed, name, self.dim)

    def with_relations(self, names: Iterable[str]) -> "Lexicon":
        missing = [n for n in names if n not in self.relations]
        if not missing:
            return self
        extra = relation_store(missing, self.relation_seed, self.dim)
        return Lexicon(self.nodes, self.relations.merged(extra), self.relation_seed)


TOY_RELATION_SEED = 53


def load_toy_lexicon() -> Lexicon:
    """The bundled 16-dim vocabulary used by the examples and tests."""
    from importlib.resources import files

    data = files("diffreason") / "data"
    nodes = load_word_vectors(data / "toy_vectors.txt")
    relations = load_word_vectors(data / "toy_relations.txt")
    return Lexicon(nodes, relations, TOY_RELATION_SEED)
