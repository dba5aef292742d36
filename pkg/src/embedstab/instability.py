"""Intrinsic and extrinsic instability of repeated embedding runs.

Intrinsic instability is the mean reduced PIP loss over all pairs of runs
trained on reshuffled copies of one corpus: the noise floor of the training
procedure itself.  Extrinsic instability is the additional variation that
appears when the corpus is bootstrapped rather than merely reshuffled,
extracted as sqrt(bootstrapped-pair mean - intrinsic).  Word-level
analogues use the word-wise reduced PIP loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .pip_loss import ProxySample, reduced_pip_loss, _proxy_rows
from .space import RunSet
from .stats import spearman

__all__ = [
    "InstabilityReport",
    "intrinsic_instability",
    "extrinsic_instability",
    "wordwise_instability",
    "frequency_profile",
]


@dataclass(frozen=True)
class InstabilityReport:
    """Instability measurements; `extrinsic` is None when undefined.

    The extrinsic value is undefined when the bootstrapped-pair mean falls
    below the intrinsic mean (the square root would be imaginary); both
    inputs stay reported so the condition is auditable.
    """

    intrinsic: float
    intrinsic_std: float
    pair_count: int
    proxy_size: int
    proxy_seed: int
    boot_mean: float | None = None
    boot_std: float | None = None
    boot_pair_count: int = 0
    extrinsic: float | None = None
    extrinsic_std: float | None = None

    @property
    def extrinsic_undefined(self) -> bool:
        return self.boot_pair_count > 0 and self.extrinsic is None


def _pair_values(runs: RunSet, proxy: ProxySample) -> np.ndarray:
    if len(runs) < 2:
        raise ValueError(f"need at least 2 runs, got {len(runs)}")
    values = [
        reduced_pip_loss(a, b, proxy)
        for a, b in combinations(runs.spaces, 2)
    ]
    return np.array(values)


def intrinsic_instability(shuffled: RunSet, proxy: ProxySample) -> InstabilityReport:
    """Mean and std of reduced PIP loss over all pairs of shuffled runs."""
    values = _pair_values(shuffled, proxy)
    return InstabilityReport(
        intrinsic=float(values.mean()),
        intrinsic_std=float(values.std()),
        pair_count=len(values),
        proxy_size=len(proxy),
        proxy_seed=proxy.seed,
    )


def _extrinsic_parts(
    intrinsic: float,
    intrinsic_std: float,
    boot_mean: float,
    boot_std: float,
) -> tuple[float | None, float | None]:
    excess = boot_mean - intrinsic
    if excess < 0.0:
        return None, None
    extrinsic = math.sqrt(excess)
    if extrinsic == 0.0:
        return 0.0, None
    # Delta method: d sqrt(b - i) = (db - di) / (2 sqrt(b - i)).
    spread = math.sqrt(boot_std**2 + intrinsic_std**2) / (2.0 * extrinsic)
    return extrinsic, spread


def extrinsic_instability(
    shuffled: RunSet, bootstrapped: RunSet, proxy: ProxySample
) -> InstabilityReport:
    """Corpus-level instability beyond the training noise floor.

    Both run sets are evaluated on the same proxy so the two means are
    comparable.
    """
    base = intrinsic_instability(shuffled, proxy)
    boot = _pair_values(bootstrapped, proxy)
    boot_mean = float(boot.mean())
    boot_std = float(boot.std())
    extrinsic, spread = _extrinsic_parts(
        base.intrinsic, base.intrinsic_std, boot_mean, boot_std
    )
    return InstabilityReport(
        intrinsic=base.intrinsic,
        intrinsic_std=base.intrinsic_std,
        pair_count=base.pair_count,
        proxy_size=len(proxy),
        proxy_seed=proxy.seed,
        boot_mean=boot_mean,
        boot_std=boot_std,
        boot_pair_count=len(boot),
        extrinsic=extrinsic,
        extrinsic_std=spread,
    )


def _pairwise_wordwise(
    runs: RunSet, proxy: ProxySample, words: Sequence[str]
) -> np.ndarray:
    """(pair, word) matrix of word-wise reduced PIP losses."""
    if len(runs) < 2:
        raise ValueError(f"need at least 2 runs, got {len(runs)}")
    proxy_rows = [_proxy_rows(s, proxy, f"run {i}") for i, s in enumerate(runs.spaces)]
    word_rows = [
        s.matrix[[s.vocab.position(w) for w in words]] for s in runs.spaces
    ]
    scale = 2.0 * math.sqrt(len(proxy))
    rows = []
    for i, j in combinations(range(len(runs)), 2):
        diff = word_rows[i] @ proxy_rows[i].T - word_rows[j] @ proxy_rows[j].T
        rows.append(np.linalg.norm(diff, axis=1) / scale)
    return np.array(rows)


def wordwise_instability(
    word: str, shuffled: RunSet, bootstrapped: RunSet, proxy: ProxySample
) -> tuple[float, float | None]:
    """(intrinsic, extrinsic) instability of one word; extrinsic may be None."""
    j_int = float(_pairwise_wordwise(shuffled, proxy, [word]).mean())
    boot_mean = float(_pairwise_wordwise(bootstrapped, proxy, [word]).mean())
    excess = boot_mean - j_int
    return j_int, math.sqrt(excess) if excess >= 0.0 else None


def frequency_profile(
    shuffled: RunSet, proxy: ProxySample, batches: int = 20
) -> tuple[list[tuple[int, float, float, int]], tuple[float, float]]:
    """Word-level intrinsic instability grouped into frequency batches.

    Words from the joint vocabulary (those with recorded frequencies) are
    sorted by frequency and cut into `batches` near-equal groups.  Returns
    per-batch rows (batch index, mean frequency, mean word-level intrinsic
    instability, word count) and the Spearman (rho, p) between batch mean
    frequency and batch mean instability.  This is a report, not a test:
    how flat the profile is depends on the corpus.
    """
    from .space import joint_vocabulary

    if batches < 2:
        raise ValueError(f"need at least 2 batches, got {batches}")
    joint = joint_vocabulary(shuffled.spaces)
    freq = shuffled.spaces[0].vocab.frequency
    if freq is None:
        raise ValueError("runs carry no word frequencies")
    words = [w for w in joint.words if w in freq]
    if len(words) < batches:
        raise ValueError(f"{len(words)} words cannot fill {batches} batches")
    words.sort(key=lambda w: (freq[w], w))
    values = _pairwise_wordwise(shuffled, proxy, words).mean(axis=0)
    bounds = np.linspace(0, len(words), batches + 1).astype(int)
    rows = []
    for b in range(batches):
        lo, hi = bounds[b], bounds[b + 1]
        batch_words = words[lo:hi]
        rows.append(
            (
                b,
                float(np.mean([freq[w] for w in batch_words])),
                float(values[lo:hi].mean()),
                len(batch_words),
            )
        )
    rho, p = spearman([r[1] for r in rows], [r[2] for r in rows])
    return rows, (rho, p)
