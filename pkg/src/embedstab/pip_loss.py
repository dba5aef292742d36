"""Pairwise-inner-product (PIP) losses between normalized embedding spaces.

The PIP matrix of a normalized space is its Gram matrix, whose entries are
exactly the pairwise cosine similarities.  The PIP loss is the Frobenius
distance between two spaces' PIP matrices restricted to a proxy word set;
it compares spaces without aligning them, since Gram matrices are invariant
under orthogonal transforms.  The reduced variants rescale the loss into
[0, 1] so values are comparable across proxy sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .space import EmbeddingSpace, joint_vocabulary, restrict
from .gaussian import StabilityProfile

__all__ = [
    "ProxySample",
    "sample_proxy",
    "pip_loss",
    "reduced_pip_loss",
    "wordwise_reduced_pip_loss",
    "expected_wordwise_pip",
    "chi_relative_width",
]

DEFAULT_PROXY_SIZE = 20_000
_BLOCK_ROWS = 256


@dataclass(frozen=True)
class ProxySample:
    """A fixed word subset over which PIP losses are evaluated."""

    words: tuple[str, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.words:
            raise ValueError("proxy must contain at least one word")
        if len(set(self.words)) != len(self.words):
            raise ValueError("proxy contains duplicate words")

    def __len__(self) -> int:
        return len(self.words)


def sample_proxy(
    spaces: Sequence[EmbeddingSpace],
    size: int = DEFAULT_PROXY_SIZE,
    seed: int = 0,
) -> ProxySample:
    """Seeded without-replacement proxy drawn from the joint vocabulary.

    When the joint vocabulary has at most `size` words the whole vocabulary
    is used.  Selected words keep the joint vocabulary's order, so the
    sample is stable under vocabulary reordering of later spaces.
    """
    if size < 1:
        raise ValueError(f"proxy size must be >= 1, got {size}")
    joint = joint_vocabulary(spaces).words
    if len(joint) <= size:
        return ProxySample(joint, seed)
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(len(joint), size=size, replace=False))
    return ProxySample(tuple(joint[i] for i in picks), seed)


def _proxy_rows(space: EmbeddingSpace, proxy: ProxySample, name: str) -> np.ndarray:
    if not space.normalized:
        raise ValueError(
            f"{name} is not normalized; PIP entries are cosines only for "
            "unit rows, so normalize explicitly first"
        )
    return restrict(space, proxy.words).matrix


def pip_loss(
    space_a: EmbeddingSpace, space_b: EmbeddingSpace, proxy: ProxySample
) -> float:
    """Frobenius norm of the difference of the proxy-restricted PIP matrices."""
    a = _proxy_rows(space_a, proxy, "first space")
    b = _proxy_rows(space_b, proxy, "second space")
    total = 0.0
    # Row blocks keep memory at O(block * |proxy|) instead of |proxy|^2.
    for start in range(0, a.shape[0], _BLOCK_ROWS):
        stop = start + _BLOCK_ROWS
        diff = a[start:stop] @ a.T - b[start:stop] @ b.T
        total += float(np.einsum("ij,ij->", diff, diff))
    return math.sqrt(total)


def reduced_pip_loss(
    space_a: EmbeddingSpace, space_b: EmbeddingSpace, proxy: ProxySample
) -> float:
    """PIP loss rescaled by 1/(2 |proxy|) into [0, 1]."""
    return pip_loss(space_a, space_b, proxy) / (2.0 * len(proxy))


def wordwise_reduced_pip_loss(
    word: str,
    space_a: EmbeddingSpace,
    space_b: EmbeddingSpace,
    proxy: ProxySample,
) -> float:
    """One word's share of the reduced PIP loss, rescaled by 1/(2 sqrt(|proxy|)).

    Compares the word's cosine profile against the proxy words between the
    two spaces; the word itself may appear in the proxy and contributes 0.
    """
    a = _proxy_rows(space_a, proxy, "first space")
    b = _proxy_rows(space_b, proxy, "second space")
    row_a = space_a.matrix[space_a.vocab.position(word)]
    row_b = space_b.matrix[space_b.vocab.position(word)]
    diff = a @ row_a - b @ row_b
    return float(np.linalg.norm(diff)) / (2.0 * math.sqrt(len(proxy)))


def expected_wordwise_pip(profile: StabilityProfile) -> float:
    """Predicted mean word-wise reduced PIP loss from a stability profile.

    Under the Gaussian pair model the expected loss depends only on the
    pair standard deviations: sqrt(sum(sigma^2) / (2 N)) over the profile's
    N entries (the proxy vocabulary).
    """
    sigmas = np.array([e.sigma for e in profile.entries])
    return math.sqrt(float(sigmas @ sigmas) / (2.0 * len(sigmas)))


def chi_relative_width(v: int) -> float:
    """Relative width sigma/mu of the chi distribution with v degrees of freedom.

    The norm of a v-dimensional standard Gaussian vector follows this
    distribution; its relative width shrinks as 1/sqrt(v), which is why
    PIP-type losses concentrate for large proxy vocabularies.  mu and sigma
    come from the gamma function evaluated in log space, so large v does
    not overflow.
    """
    if v < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {v}")
    mu = math.sqrt(2.0) * math.exp(math.lgamma((v + 1) / 2.0) - math.lgamma(v / 2.0))
    variance = v - mu * mu
    if variance < 0.0:  # cancellation guard for very large v
        variance = 0.0
    return math.sqrt(variance) / mu
