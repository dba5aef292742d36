"""Shared builders for synthetic spaces, run sets, and corpora."""

from __future__ import annotations

import numpy as np

from embedstab import Corpus, EmbeddingSpace, RunSet, Vocabulary, normalize


def words_for(count: int, prefix: str = "w") -> tuple[str, ...]:
    return tuple(f"{prefix}{i:04d}" for i in range(count))


def random_normalized_space(
    v: int, d: int, seed: int, frequency: dict[str, int] | None = None
) -> EmbeddingSpace:
    rng = np.random.default_rng(seed)
    vocab = Vocabulary(words_for(v), frequency=frequency)
    return normalize(EmbeddingSpace(vocab, rng.normal(size=(v, d))))


def random_rotation(d: int, seed: int) -> np.ndarray:
    q, r = np.linalg.qr(np.random.default_rng(seed).normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def rotated_copy(space: EmbeddingSpace, seed: int) -> EmbeddingSpace:
    rotation = random_rotation(space.dim, seed)
    return EmbeddingSpace(
        space.vocab, space.matrix @ rotation, normalized=space.normalized
    )


def planted_cosine_space(target: str, cosines: dict[str, float]) -> EmbeddingSpace:
    """A normalized space where cos(target, query_i) is exactly cosines[query_i].

    The target sits on the first axis; query i combines the first axis with
    its own private axis, so every target-query cosine is planted exactly and
    the queries are mutually near-orthogonal.
    """
    queries = list(cosines)
    dim = len(queries) + 1
    rows = np.zeros((len(queries) + 1, dim))
    rows[0, 0] = 1.0
    for i, query in enumerate(queries):
        c = cosines[query]
        if not -1.0 <= c <= 1.0:
            raise ValueError(f"cosine out of range for {query!r}: {c}")
        rows[i + 1, 0] = c
        rows[i + 1, i + 1] = np.sqrt(1.0 - c * c)
    vocab = Vocabulary((target, *queries))
    return EmbeddingSpace(vocab, rows, normalized=True)


def planted_profile_runs(
    target: str,
    mu: dict[str, float],
    sigma: dict[str, float],
    r: int,
    seed: int,
    mode: str = "shuffled",
) -> RunSet:
    """r spaces whose target-query cosines are independent clipped Gaussians."""
    rng = np.random.default_rng(seed)
    spaces = []
    for _ in range(r):
        cosines = {
            q: float(np.clip(rng.normal(mu[q], sigma[q]), -1.0, 1.0)) for q in mu
        }
        spaces.append(planted_cosine_space(target, cosines))
    return RunSet(tuple(spaces), mode=mode)


def two_topic_corpus(
    docs: int = 300, doc_len: int = 30, seed: int = 0
) -> tuple[Corpus, list[str], list[str]]:
    """Documents drawn from two disjoint topics plus shared filler words."""
    rng = np.random.default_rng(seed)
    topic_a = [f"alpha{i}" for i in range(20)]
    topic_b = [f"beta{i}" for i in range(20)]
    shared = [f"fill{i}" for i in range(20)]
    documents = []
    for index in range(docs):
        topic = topic_a if index % 2 == 0 else topic_b
        tokens = tuple(
            topic[rng.integers(len(topic))]
            if rng.random() < 0.7
            else shared[rng.integers(len(shared))]
            for _ in range(doc_len)
        )
        documents.append(tokens)
    return Corpus(tuple(documents)), topic_a, topic_b
