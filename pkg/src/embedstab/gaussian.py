"""Gaussian model of how word-pair cosine similarities vary across runs.

Across repeated runs the cosine of a fixed (target, query) pair is modeled
as an independent Gaussian with parameters (mu, sigma) estimated per pair.
From a target's full profile of pair statistics the model predicts, by
numerical integration, the probability that a query lands at rank 1 or
within the top 2 of the target's neighbor list in a fresh run, and from
those the expected top-n overlap between two fresh runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfc as _erfc_array, ndtr as _ndtr

from .space import RunSet, _unit_rows, joint_vocabulary

__all__ = [
    "PairStatistics",
    "StabilityProfile",
    "estimate_pair_stats",
    "estimate_profile",
    "prob_greater",
    "predict_p_hash1",
    "predict_p_hash2",
    "expected_overlap",
    "structure_factor",
    "save_profile",
    "load_profile",
]

DEFAULT_PRUNING_THRESHOLD = 1e-5
DEFAULT_INTEGRATION_TOL = 1e-6
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_MAX_SPLIT_DEPTH = 30


@dataclass(frozen=True)
class PairStatistics:
    """Mean and standard deviation of one pair's cosine across runs."""

    target: str
    query: str
    mu: float
    sigma: float
    r: int

    def __post_init__(self) -> None:
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.r < 1:
            raise ValueError(f"sample count must be >= 1, got {self.r}")
        if not -1.0 <= self.mu <= 1.0:
            raise ValueError(f"mean cosine {self.mu} outside [-1, 1]")


@dataclass(frozen=True)
class StabilityProfile:
    """Pair statistics of one target against a fixed query vocabulary."""

    target: str
    entries: tuple[PairStatistics, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("profile must have at least one entry")
        index: dict[str, int] = {}
        for i, entry in enumerate(self.entries):
            if entry.target != self.target:
                raise ValueError(
                    f"entry target {entry.target!r} != profile target {self.target!r}"
                )
            if entry.query == self.target:
                raise ValueError("target may not appear among its own queries")
            if entry.query in index:
                raise ValueError(f"duplicate query {entry.query!r}")
            index[entry.query] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def queries(self) -> tuple[str, ...]:
        return tuple(e.query for e in self.entries)

    def entry(self, query: str) -> PairStatistics:
        try:
            return self.entries[self._index[query]]
        except KeyError:
            raise KeyError(f"query {query!r} not in profile") from None


def _pair_moments(samples: np.ndarray, unbiased: bool) -> tuple[np.ndarray, np.ndarray]:
    r = samples.shape[0]
    mu = samples.mean(axis=0)
    centered = samples - mu
    denom = r - 1 if unbiased and r > 1 else r
    sigma = np.sqrt((centered * centered).sum(axis=0) / denom)
    return mu, sigma


def _cosine_samples(runs: RunSet, target: str, queries: Sequence[str]) -> np.ndarray:
    """(r, len(queries)) matrix of cosines, one row per run."""
    rows = []
    for space in runs.spaces:
        unit = _unit_rows(space)
        t = unit[space.vocab.position(target)]
        q = np.array([space.vocab.position(w) for w in queries], dtype=np.intp)
        rows.append(np.clip(unit[q] @ t, -1.0, 1.0))
    return np.array(rows)


def estimate_pair_stats(
    runs: RunSet, target: str, query: str, *, unbiased: bool = False
) -> PairStatistics:
    """Per-pair moments across runs.

    `sigma` divides by r (maximum likelihood) by default; pass
    `unbiased=True` for the conventional r - 1 denominator.
    """
    if target == query:
        raise ValueError("target and query must differ")
    samples = _cosine_samples(runs, target, [query])[:, 0]
    mu, sigma = _pair_moments(samples[:, None], unbiased)
    return PairStatistics(target, query, float(mu[0]), float(sigma[0]), len(runs))


def estimate_profile(
    runs: RunSet,
    target: str,
    queries: Sequence[str] | None = None,
    *,
    unbiased: bool = False,
) -> StabilityProfile:
    """Pair statistics of `target` against every query word.

    `queries` defaults to the joint vocabulary minus the target.
    """
    if queries is None:
        queries = [w for w in joint_vocabulary(runs.spaces).words if w != target]
    elif target in queries:
        raise ValueError("target may not appear among its own queries")
    if not queries:
        raise ValueError("no query words")
    samples = _cosine_samples(runs, target, queries)
    mu, sigma = _pair_moments(samples, unbiased)
    r = len(runs)
    entries = tuple(
        PairStatistics(target, q, float(m), float(s), r)
        for q, m, s in zip(queries, mu, sigma)
    )
    return StabilityProfile(target, entries)


def prob_greater(a: PairStatistics, b: PairStatistics) -> float:
    """P(sample of a > sample of b) under independent Gaussians.

    Equals 0.5 by convention when both sigmas are zero and the means tie.
    """
    variance = a.sigma * a.sigma + b.sigma * b.sigma
    if variance == 0.0:
        if a.mu == b.mu:
            return 0.5
        return 1.0 if a.mu > b.mu else 0.0
    arg = (a.mu - b.mu) / math.sqrt(2.0 * variance)
    # erfc keeps the far tails accurate (erf saturates past |x| ~ 6), and the
    # sign branch makes prob_greater(a, b) + prob_greater(b, a) = 1 exact.
    if arg >= 0.0:
        return 1.0 - 0.5 * math.erfc(arg)
    return 0.5 * math.erfc(-arg)


def _prob_greater_vs(mu: np.ndarray, sigma: np.ndarray, mu0: float, sigma0: float) -> np.ndarray:
    """Vectorized P(entry > reference) for pruning decisions."""
    variance = sigma * sigma + sigma0 * sigma0
    out = np.where(mu > mu0, 1.0, np.where(mu < mu0, 0.0, 0.5))
    positive = variance > 0.0
    if np.any(positive):
        arg = (mu[positive] - mu0) / np.sqrt(2.0 * variance[positive])
        tail = 0.5 * _erfc_array(np.abs(arg))
        out[positive] = np.where(arg >= 0.0, 1.0 - tail, tail)
    return out


def _adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float,
    anchors: Sequence[float] = (),
) -> float:
    """Adaptive Simpson quadrature to absolute tolerance `tol`.

    The interval is pre-split at the `anchors` (where the integrand is known
    to bend or step), and every segment is forced through a few subdivisions
    before the convergence test may fire.  Without the forced splits, a bump
    far narrower than the interval can fall between the first sample points
    and be silently integrated as zero.
    """
    points = [a]
    points.extend(sorted(x for x in set(anchors) if a < x < b))
    points.append(b)
    segment_tol = tol / (len(points) - 1)
    total = 0.0
    for lo, hi in zip(points, points[1:]):
        m = 0.5 * (lo + hi)
        flo, fm, fhi = f(lo), f(m), f(hi)
        whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi)
        total += _simpson_split(
            f, lo, hi, flo, fm, fhi, whole, segment_tol, _MAX_SPLIT_DEPTH, 2
        )
    return total


def _simpson_split(
    f: Callable[[float], float],
    a: float,
    b: float,
    fa: float,
    fm: float,
    fb: float,
    whole: float,
    tol: float,
    depth: int,
    force: int,
) -> float:
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or (force <= 0 and abs(delta) <= 15.0 * tol):
        return left + right + delta / 15.0
    half = 0.5 * tol
    return _simpson_split(
        f, a, m, fa, flm, fm, left, half, depth - 1, force - 1
    ) + _simpson_split(f, m, b, fm, frm, fb, right, half, depth - 1, force - 1)


def _competitor_cdf(x: float, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """P(competitor < x) per competitor; zero-sigma entries step at their mean."""
    safe = np.where(sigma > 0.0, sigma, 1.0)
    gaussian = _ndtr((x - mu) / safe)
    step = np.where(x > mu, 1.0, np.where(x < mu, 0.0, 0.5))
    return np.where(sigma > 0.0, gaussian, step)


def _rank_reference(mu: np.ndarray, sigma: np.ndarray, rank: int) -> tuple[float, float]:
    """(mu, sigma) of the entry with the rank-th highest mean (0-based)."""
    order = np.argsort(-mu, kind="stable")
    ref = order[min(rank, len(order) - 1)]
    return float(mu[ref]), float(sigma[ref])


def _keep_mask(
    mu: np.ndarray, sigma: np.ndarray, threshold: float, rank: int
) -> np.ndarray:
    """Entries with a non-negligible chance of reaching the given rank.

    An entry whose probability of exceeding the rank-th highest mean falls
    below `threshold` can neither reach the top-(rank+1) list nor shift the
    survivors' integrals (its CDF factor is 1 there), so it is dropped.
    """
    mu0, sigma0 = _rank_reference(mu, sigma, rank)
    return _prob_greater_vs(mu, sigma, mu0, sigma0) >= threshold


def _anchor_points(mu_q: float, sigma_q: float, mu_c: np.ndarray) -> list[float]:
    """Known feature locations: competitor means and the query's own scales."""
    anchors = [mu_q + k * sigma_q for k in (-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0)]
    anchors.extend(float(m) for m in mu_c)
    return anchors


def _p_first(
    idx: int, mu: np.ndarray, sigma: np.ndarray, keep: np.ndarray, tol: float
) -> float:
    """P(query idx ranks first among kept entries)."""
    others = keep.copy()
    others[idx] = False
    mu_c = mu[others]
    sigma_c = sigma[others]
    mu_q = float(mu[idx])
    sigma_q = float(sigma[idx])
    if mu_c.size == 0:
        return 1.0
    if sigma_q == 0.0:
        return float(np.prod(_competitor_cdf(mu_q, mu_c, sigma_c)))

    def integrand(x: float) -> float:
        t = (x - mu_q) / sigma_q
        g = math.exp(-0.5 * t * t) * _INV_SQRT_2PI / sigma_q
        if g == 0.0:
            return 0.0
        return g * float(np.prod(_competitor_cdf(x, mu_c, sigma_c)))

    lo = mu_q - 8.0 * sigma_q
    hi = mu_q + 8.0 * sigma_q
    value = _adaptive_simpson(
        integrand, lo, hi, tol, anchors=_anchor_points(mu_q, sigma_q, mu_c)
    )
    return min(1.0, max(0.0, value))


def _p_first_given_above(
    idx: int,
    above: int,
    mu: np.ndarray,
    sigma: np.ndarray,
    keep: np.ndarray,
    tol: float,
) -> float:
    """P(entry `above` is the only kept entry exceeding query `idx`)."""
    others = keep.copy()
    others[idx] = False
    others[above] = False
    mu_c = mu[others]
    sigma_c = sigma[others]
    mu_q = float(mu[idx])
    sigma_q = float(sigma[idx])
    mu_n = mu[above : above + 1]
    sigma_n = sigma[above : above + 1]

    def survivor_factor(x: float) -> float:
        exceed = 1.0 - float(_competitor_cdf(x, mu_n, sigma_n)[0])
        if exceed == 0.0 or mu_c.size == 0:
            return exceed
        return exceed * float(np.prod(_competitor_cdf(x, mu_c, sigma_c)))

    if sigma_q == 0.0:
        return survivor_factor(mu_q)

    def integrand(x: float) -> float:
        t = (x - mu_q) / sigma_q
        g = math.exp(-0.5 * t * t) * _INV_SQRT_2PI / sigma_q
        if g == 0.0:
            return 0.0
        return g * survivor_factor(x)

    lo = mu_q - 8.0 * sigma_q
    hi = mu_q + 8.0 * sigma_q
    anchors = _anchor_points(mu_q, sigma_q, mu_c)
    anchors.append(float(mu_n[0]))
    value = _adaptive_simpson(integrand, lo, hi, tol, anchors=anchors)
    return min(1.0, max(0.0, value))


def _profile_arrays(profile: StabilityProfile) -> tuple[np.ndarray, np.ndarray]:
    mu = np.array([e.mu for e in profile.entries])
    sigma = np.array([e.sigma for e in profile.entries])
    return mu, sigma


def predict_p_hash1(
    profile: StabilityProfile,
    query: str,
    *,
    pruning_threshold: float = DEFAULT_PRUNING_THRESHOLD,
    tol: float = DEFAULT_INTEGRATION_TOL,
) -> float:
    """Probability that `query` is the target's nearest neighbor in one run.

    Integrates the query's similarity density against the product of the
    competitors' CDFs over mu +- 8 sigma.  Entries with probability below
    `pruning_threshold` of exceeding the highest-mean entry are pruned:
    as candidates they return 0 outright, and as competitors they are
    dropped from the CDF product.
    """
    profile.entry(query)
    mu, sigma = _profile_arrays(profile)
    keep = _keep_mask(mu, sigma, pruning_threshold, rank=0)
    idx = profile._index[query]
    if not keep[idx]:
        return 0.0
    return _p_first(idx, mu, sigma, keep, tol)


def predict_p_hash2(
    profile: StabilityProfile,
    query: str,
    *,
    pruning_threshold: float = DEFAULT_PRUNING_THRESHOLD,
    tol: float = DEFAULT_INTEGRATION_TOL,
) -> float:
    """Probability that `query` lands in the target's top-2 list in one run.

    Adds to the rank-1 probability, for each other entry n, the probability
    that n is the only entry exceeding the query.  Pruning for the rank-2
    sum is relative to the second-highest mean: an entry must have a
    non-negligible chance of cracking the top two to participate.
    """
    p1 = predict_p_hash1(
        profile, query, pruning_threshold=pruning_threshold, tol=tol
    )
    mu, sigma = _profile_arrays(profile)
    keep = _keep_mask(mu, sigma, pruning_threshold, rank=1)
    idx = profile._index[query]
    if not keep[idx]:
        return p1
    total = p1
    for above in np.flatnonzero(keep):
        if above == idx:
            continue
        total += _p_first_given_above(idx, int(above), mu, sigma, keep, tol)
    return min(1.0, total)


def expected_overlap(
    profile: StabilityProfile,
    n: int,
    *,
    pruning_threshold: float = DEFAULT_PRUNING_THRESHOLD,
    tol: float = DEFAULT_INTEGRATION_TOL,
) -> float:
    """Expected top-n overlap fraction between two independent runs.

    Two runs agree on a top-n slot with probability p_#n(query) per query;
    summing the squares and dividing by the list size n gives the expected
    overlap fraction, which stays in [0, 1].
    """
    if n == 1:
        predict = predict_p_hash1
    elif n == 2:
        predict = predict_p_hash2
    else:
        raise ValueError(f"n must be 1 or 2, got {n}")
    total = 0.0
    for query in profile.queries:
        p = predict(profile, query, pruning_threshold=pruning_threshold, tol=tol)
        total += p * p
    return min(1.0, total / n)


def structure_factor(
    profile: StabilityProfile,
    n: int,
    gamma: float | None = None,
    *,
    pruning_threshold: float = DEFAULT_PRUNING_THRESHOLD,
    tol: float = DEFAULT_INTEGRATION_TOL,
) -> float:
    """Expected overlap with every sigma replaced by the constant `gamma`.

    `gamma` defaults to the mean sigma of the profile.  The result isolates
    how much of the expected overlap is explained by the arrangement of the
    mean similarities alone, with the pair-level noise homogenized.
    """
    if gamma is None:
        gamma = float(np.mean([e.sigma for e in profile.entries]))
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    flattened = StabilityProfile(
        profile.target,
        tuple(
            PairStatistics(e.target, e.query, e.mu, gamma, e.r)
            for e in profile.entries
        ),
    )
    return expected_overlap(
        flattened, n, pruning_threshold=pruning_threshold, tol=tol
    )


def save_profile(profile: StabilityProfile, path: str) -> None:
    """Write a profile as TSV with columns: target query mu sigma r."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("target\tquery\tmu\tsigma\tr\n")
        for e in profile.entries:
            fh.write(f"{e.target}\t{e.query}\t{e.mu!r}\t{e.sigma!r}\t{e.r}\n")


def load_profile(path: str) -> StabilityProfile:
    """Read a profile written by save_profile."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line == "target\tquery\tmu\tsigma\tr":
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 columns, got {len(parts)}")
            target, query, mu, sigma, r = parts
            entries.append(PairStatistics(target, query, float(mu), float(sigma), int(r)))
    if not entries:
        raise ValueError(f"{path}: no profile rows")
    return StabilityProfile(entries[0].target, tuple(entries))
