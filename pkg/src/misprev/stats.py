"""Statistical primitives: Wilson interval, prevalence arithmetic,
multinomial sampling, percentile summaries and reproducible random streams."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from misprev.labels import GroupedCounts, PrevalenceDefinition

__all__ = [
    "InvalidCounts",
    "BadProbabilities",
    "EmptySamples",
    "WilsonInterval",
    "wilson_interval",
    "z_for_alpha",
    "prevalence",
    "RandomStream",
    "derive_substream",
    "multinomial_draw",
    "PercentileSummary",
    "percentile_summary",
]


class InvalidCounts(ValueError):
    pass


class BadProbabilities(ValueError):
    pass


class EmptySamples(ValueError):
    pass


@dataclass(frozen=True)
class WilsonInterval:
    p_hat: float
    lower: float
    upper: float
    n: int
    z: float


def z_for_alpha(alpha: float) -> float:
    """Two-sided standard normal quantile z_{1-alpha/2}."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha == 0.05:
        return 1.96
    return float(norm.ppf(1.0 - alpha / 2.0))


def wilson_interval(x: int, n: int, z: float = 1.96) -> WilsonInterval:
    """Wilson score interval for a binomial proportion.

    Parameters
    ----------
    x : int
        Number of successes.
    n : int
        Number of trials, ``n >= 1``.
    z : float
        Standard normal quantile; 1.96 gives a 95% interval.

    Returns
    -------
    WilsonInterval
        Bounds are clamped to ``[0, 1]`` and to bracket ``p_hat``.
    """
    if n <= 0 or x < 0 or x > n:
        raise InvalidCounts(f"need 0 <= x <= n and n >= 1, got x={x}, n={n}")
    if z <= 0:
        raise ValueError(f"z must be positive, got {z}")
    p_hat = x / n
    z2 = z * z
    centre = p_hat + z2 / (2 * n)
    half = z * math.sqrt(p_hat * (1 - p_hat) / n + z2 / (4 * n * n))
    scale = 1 + z2 / n
    lower = (centre - half) / scale
    upper = (centre + half) / scale
    # floating-point drift only; the closed form already satisfies these
    lower = min(max(lower, 0.0), p_hat)
    upper = max(min(upper, 1.0), p_hat)
    if x == 0:
        lower = 0.0
    if x == n:
        upper = 1.0
    return WilsonInterval(p_hat=p_hat, lower=lower, upper=upper, n=n, z=z)


def prevalence(counts: GroupedCounts, definition: PrevalenceDefinition) -> Optional[float]:
    """Prevalence as a proportion, or ``None`` when the denominator is zero."""
    if definition is PrevalenceDefinition.Restricted:
        denom = counts.n_mis + counts.n_legit
    else:
        denom = counts.total
    if denom == 0:
        return None
    return counts.n_mis / denom


def prevalence_array(counts: np.ndarray, definition: PrevalenceDefinition) -> np.ndarray:
    """Vectorised :func:`prevalence` over the last axis (mis, legit, rest).

    Undefined entries come back as NaN.
    """
    counts = np.asarray(counts)
    mis = counts[..., 0].astype(float)
    if definition is PrevalenceDefinition.Restricted:
        denom = mis + counts[..., 1]
    else:
        denom = counts.sum(axis=-1).astype(float)
    out = np.full(mis.shape, np.nan)
    np.divide(mis, denom, out=out, where=denom > 0)
    return out


def _label_word(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class RandomStream:
    """A named, reproducible substream of a master seed.

    A stream is identified by its master seed and a path of
    ``(label, index)`` components. Draws depend only on that identity, so
    replicates that derive their own substreams give the same numbers
    whatever order or process they run in. Generators are Philox
    (counter-based) seeded through :class:`numpy.random.SeedSequence`
    with the hashed path as spawn key.
    """

    master_seed: int
    path: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def derive(self, label: str, index: int = 0) -> "RandomStream":
        if index < 0:
            raise ValueError("substream index must be nonnegative")
        return RandomStream(self.master_seed, self.path + ((label, int(index)),))

    def seed_sequence(self) -> np.random.SeedSequence:
        key = []
        for label, index in self.path:
            key.extend((_label_word(label), index))
        return np.random.SeedSequence(entropy=self.master_seed, spawn_key=tuple(key))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence()))


def derive_substream(stream: RandomStream, label: str, index: int) -> RandomStream:
    return stream.derive(label, index)


def _check_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(~np.isfinite(p)) or np.any(p < 0):
        raise BadProbabilities(f"invalid probability vector {probs!r}")
    if abs(p.sum() - 1.0) > 1e-9:
        raise BadProbabilities(f"probabilities sum to {p.sum()!r}, not 1")
    return p / p.sum()


def multinomial_draw(stream: RandomStream, trials: int, probs: Sequence[float]) -> np.ndarray:
    """Draw one multinomial count vector from a fresh generator on ``stream``."""
    p = _check_probs(probs)
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    if trials == 0:
        return np.zeros(p.size, dtype=np.int64)
    return stream.generator().multinomial(trials, p).astype(np.int64)


@dataclass(frozen=True)
class PercentileSummary:
    mean: float
    p2_5: float
    p97_5: float
    median: float
    n_samples: int


def percentile_summary(samples) -> PercentileSummary:
    """Mean, median and 2.5/97.5 percentiles of a sample.

    Percentiles use linear interpolation between closest ranks (the
    inclusive rule, numpy's default ``linear`` method).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptySamples("cannot summarise an empty sample")
    if np.any(np.isnan(x)):
        raise ValueError("undefined samples must be excluded before summarising")
    x = np.sort(x)
    lo, med, hi = np.percentile(x, [2.5, 50.0, 97.5])
    # sorted input makes the summation order independent of the caller's order
    mean = float(x.mean())
    mean = min(max(mean, float(x[0])), float(x[-1]))
    return PercentileSummary(
        mean=mean, p2_5=float(lo), p97_5=float(hi), median=float(med), n_samples=int(x.size)
    )
