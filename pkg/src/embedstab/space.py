"""Containers, I/O, and elementary geometry for word-embedding spaces.

The on-disk interchange format is the plain-text vector format: a header line
``"<v> <d>"`` followed by one ``"<word> <x1> ... <xd>"`` line per word. Word
frequencies travel in an optional tab-separated sidecar file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "LoadError",
    "Vocabulary",
    "EmbeddingSpace",
    "AnalogyDataset",
    "RunSet",
    "load_text_vectors",
    "save_text_vectors",
    "load_frequencies",
    "save_frequencies",
    "load_analogies",
    "normalize",
    "cosine",
    "nearest_neighbors",
    "analogy_score",
    "joint_vocabulary",
    "restrict",
]

_NORM_ATOL = 1e-9


class LoadError(ValueError):
    """Raised when a vector, frequency, corpus, or analogy file is malformed."""


@dataclass(frozen=True)
class Vocabulary:
    """Ordered set of unique tokens, optionally with per-word occurrence counts."""

    words: tuple[str, ...]
    frequency: Mapping[str, int] | None = None
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index: dict[str, int] = {}
        for pos, word in enumerate(self.words):
            if word in index:
                raise ValueError(f"duplicate word {word!r}")
            index[word] = pos
        object.__setattr__(self, "index", index)
        if self.frequency is not None:
            for word in self.words:
                count = self.frequency.get(word)
                if count is None:
                    raise ValueError(f"no frequency entry for {word!r}")
                if count < 1:
                    raise ValueError(f"frequency of {word!r} must be >= 1, got {count}")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return word in self.index

    def __iter__(self) -> Iterator[str]:
        return iter(self.words)

    def position(self, word: str) -> int:
        try:
            return self.index[word]
        except KeyError:
            raise KeyError(f"word {word!r} not in vocabulary") from None


@dataclass(frozen=True)
class EmbeddingSpace:
    """A vocabulary plus a dense v x d matrix whose row k embeds word k.

    The matrix is frozen at construction; all operations on a space are pure
    reads, so instances are safe to share between threads.
    """

    vocab: Vocabulary
    matrix: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
        if matrix.shape[0] != len(self.vocab):
            raise ValueError(
                f"matrix has {matrix.shape[0]} rows for {len(self.vocab)} words"
            )
        if matrix.shape[1] < 1:
            raise ValueError("embedding dimension must be >= 1")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("matrix contains non-finite entries")
        if self.normalized:
            norms = np.linalg.norm(matrix, axis=1)
            if norms.size and np.max(np.abs(norms - 1.0)) > _NORM_ATOL:
                raise ValueError("normalized flag set but rows are not unit length")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[self.vocab.position(word)]


@dataclass(frozen=True)
class AnalogyDataset:
    """Word 4-tuples (a, b, c, d) posing "a is to b as c is to d" questions."""

    questions: tuple[tuple[str, str, str, str], ...]

    def __post_init__(self) -> None:
        for question in self.questions:
            if len(question) != 4:
                raise ValueError(f"analogy question must have 4 tokens: {question!r}")

    def __len__(self) -> int:
        return len(self.questions)


@dataclass(frozen=True)
class RunSet:
    """Embedding spaces from repeated runs of one (technique, corpus, sampling) setup."""

    spaces: tuple[EmbeddingSpace, ...]
    mode: str = "shuffled"
    label: str = ""

    def __post_init__(self) -> None:
        if not self.spaces:
            raise ValueError("a RunSet needs at least one space")
        dims = {space.dim for space in self.spaces}
        if len(dims) != 1:
            raise ValueError(f"all runs must share one dimension, got {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.spaces)

    def __iter__(self) -> Iterator[EmbeddingSpace]:
        return iter(self.spaces)


def load_text_vectors(
    path: str | Path, frequency_path: str | Path | None = None
) -> EmbeddingSpace:
    """Load a text vector file; word order is preserved, normalized is False.

    With ``frequency_path`` given, counts from the sidecar are attached to the
    vocabulary; every loaded word must have an entry.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline()
        parts = header.split()
        if len(parts) != 2:
            raise LoadError(f"{path}:1: header must be '<v> <d>', got {header!r}")
        try:
            v, d = int(parts[0]), int(parts[1])
        except ValueError:
            raise LoadError(f"{path}:1: non-integer header fields {header!r}") from None
        if v < 0 or d < 1:
            raise LoadError(f"{path}:1: invalid sizes v={v}, d={d}")
        words: list[str] = []
        matrix = np.empty((v, d), dtype=np.float64)
        seen: set[str] = set()
        for row in range(v):
            line = handle.readline()
            lineno = row + 2
            if not line:
                raise LoadError(f"{path}:{lineno}: expected {v} rows, file ended early")
            fields = line.split()
            if len(fields) != d + 1:
                raise LoadError(
                    f"{path}:{lineno}: expected {d} values for {fields[0] if fields else '?'!r}, "
                    f"got {len(fields) - 1}"
                )
            word = fields[0]
            if word in seen:
                raise LoadError(f"{path}:{lineno}: duplicate word {word!r}")
            seen.add(word)
            try:
                matrix[row] = [float(x) for x in fields[1:]]
            except ValueError:
                raise LoadError(f"{path}:{lineno}: non-numeric value") from None
            words.append(word)
        trailing = handle.readline()
        if trailing.strip():
            raise LoadError(f"{path}:{v + 2}: more rows than the header announced")
    frequency = None
    if frequency_path is not None:
        frequency = load_frequencies(frequency_path)
        missing = [w for w in words if w not in frequency]
        if missing:
            raise LoadError(f"{frequency_path}: no count for {missing[0]!r}")
        frequency = {w: frequency[w] for w in words}
    return EmbeddingSpace(Vocabulary(tuple(words), frequency), matrix, normalized=False)


def save_text_vectors(space: EmbeddingSpace, path: str | Path) -> None:
    """Write the exact format `load_text_vectors` accepts (10 significant digits)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"{len(space)} {space.dim}\n")
        for word, row in zip(space.vocab.words, space.matrix):
            values = " ".join(format(x, ".10g") for x in row)
            handle.write(f"{word} {values}\n")


def load_frequencies(path: str | Path) -> dict[str, int]:
    """Read a "word<TAB>count" sidecar file."""
    path = Path(path)
    counts: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise LoadError(f"{path}:{lineno}: expected 'word<TAB>count'")
            word, raw = parts
            try:
                count = int(raw)
            except ValueError:
                raise LoadError(f"{path}:{lineno}: non-integer count {raw!r}") from None
            if word in counts:
                raise LoadError(f"{path}:{lineno}: duplicate word {word!r}")
            counts[word] = count
    return counts


def save_frequencies(counts: Mapping[str, int], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for word, count in counts.items():
            handle.write(f"{word}\t{count}\n")


def load_analogies(path: str | Path) -> AnalogyDataset:
    """Read "a b c d" lines; "#" comments and ": section" headers are skipped."""
    questions: list[tuple[str, str, str, str]] = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#") or stripped.startswith(":"):
                continue
            tokens = stripped.split()
            if len(tokens) != 4:
                raise LoadError(f"{path}:{lineno}: expected 4 tokens, got {len(tokens)}")
            questions.append((tokens[0], tokens[1], tokens[2], tokens[3]))
    return AnalogyDataset(tuple(questions))


def normalize(space: EmbeddingSpace) -> EmbeddingSpace:
    """Scale every row to unit L2 norm. Zero rows are an error naming the word."""
    norms = np.linalg.norm(space.matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"cannot normalize zero vector of {space.vocab.words[zero[0]]!r}")
    return EmbeddingSpace(space.vocab, space.matrix / norms[:, None], normalized=True)


def _unit_rows(space: EmbeddingSpace) -> np.ndarray:
    if space.normalized:
        return space.matrix
    norms = np.linalg.norm(space.matrix, axis=1)
    if np.any(norms == 0.0):
        word = space.vocab.words[int(np.flatnonzero(norms == 0.0)[0])]
        raise ValueError(f"zero vector for {word!r}")
    return space.matrix / norms[:, None]


def cosine(space: EmbeddingSpace, w1: str, w2: str) -> float:
    """Cosine similarity of two words' rows, clipped to [-1, 1]."""
    a = space.vector(w1)
    b = space.vector(w2)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError(f"zero vector for {w1 if na == 0.0 else w2!r}")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def _ranked_order(sims: np.ndarray, words: Sequence[str]) -> list[int]:
    # Descending similarity; equal similarities resolved by ascending word.
    order = list(np.argsort(-sims, kind="stable"))
    start = 0
    while start < len(order):
        end = start + 1
        while end < len(order) and sims[order[end]] == sims[order[start]]:
            end += 1
        if end - start > 1:
            order[start:end] = sorted(order[start:end], key=lambda i: words[i])
        start = end
    return order


def nearest_neighbors(
    space: EmbeddingSpace, target: str, n: int
) -> list[tuple[str, float]]:
    """The n words closest to the target by cosine, target excluded.

    Ties are broken by ascending lexicographic word order so rankings are
    deterministic regardless of storage order.
    """
    pos = space.vocab.position(target)
    if not 1 <= n <= len(space) - 1:
        raise ValueError(f"n must be in [1, {len(space) - 1}], got {n}")
    unit = _unit_rows(space)
    sims = unit @ unit[pos]
    sims[pos] = -np.inf
    words = space.vocab.words
    order = _ranked_order(sims, words)
    return [(words[i], float(np.clip(sims[i], -1.0, 1.0))) for i in order[:n]]


def analogy_score(
    space: EmbeddingSpace,
    dataset: AnalogyDataset,
    restrict_to: Iterable[str] | None = None,
) -> tuple[float, float]:
    """3CosAdd analogy accuracy and coverage.

    For each question (a, b, c, d) whose four words all lie in the evaluation
    vocabulary, predict argmax cosine of v(b) - v(a) + v(c) over that
    vocabulary minus {a, b, c}; composition uses unit word vectors. Returns
    (correct/answered, answered/total); an empty or fully-skipped dataset
    scores (0.0, 0.0).
    """
    if restrict_to is not None:
        allowed = set(restrict_to)
        eval_words = [w for w in space.vocab.words if w in allowed]
    else:
        eval_words = list(space.vocab.words)
    if not dataset.questions:
        return 0.0, 0.0
    if not eval_words:
        return 0.0, 0.0
    positions = {w: i for i, w in enumerate(eval_words)}
    rows = np.array([space.vocab.position(w) for w in eval_words])
    unit = _unit_rows(space)[rows]
    answered = 0
    correct = 0
    for a, b, c, d in dataset.questions:
        if any(w not in positions for w in (a, b, c, d)):
            continue
        answered += 1
        query = unit[positions[b]] - unit[positions[a]] + unit[positions[c]]
        scores = unit @ query
        for w in (a, b, c):
            scores[positions[w]] = -np.inf
        best = scores.max()
        ties = np.flatnonzero(scores == best)
        predicted = min(eval_words[i] for i in ties)
        if predicted == d:
            correct += 1
    if answered == 0:
        return 0.0, 0.0
    return correct / answered, answered / len(dataset.questions)


def joint_vocabulary(spaces: Sequence[EmbeddingSpace]) -> Vocabulary:
    """Intersection of all vocabularies, ordered by the first space's order."""
    if not spaces:
        raise ValueError("need at least one space")
    common = set(spaces[0].vocab.words)
    for space in spaces[1:]:
        common &= set(space.vocab.words)
    if not common:
        raise ValueError("spaces share no common words")
    return Vocabulary(tuple(w for w in spaces[0].vocab.words if w in common))


def restrict(space: EmbeddingSpace, words: Sequence[str]) -> EmbeddingSpace:
    """Sub-space holding exactly `words`, in the given order."""
    rows = np.array([space.vocab.position(w) for w in words], dtype=np.intp)
    frequency = None
    if space.vocab.frequency is not None:
        frequency = {w: space.vocab.frequency[w] for w in words}
    matrix = space.matrix[rows] if rows.size else np.empty((0, space.dim))
    return EmbeddingSpace(Vocabulary(tuple(words), frequency), matrix, space.normalized)
