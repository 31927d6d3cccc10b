"""Two-level keyword/post bootstrap for data-retrieval uncertainty."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from misprev.labels import (
    EMPTY_KEYWORD,
    AnnotatedPost,
    LabelCategory,
    PrevalenceDefinition,
    effective_label,
    group_label,
)
from misprev.stats import PercentileSummary, RandomStream, percentile_summary, prevalence_array

__all__ = [
    "KeywordPool",
    "BootstrapResult",
    "ExhaustedRetries",
    "keyword_pool",
    "draw_keyword_multiplicities",
    "bootstrap_retrieval",
    "map_replicates",
    "RETRY_BUDGET",
]

RETRY_BUDGET = 100
_POOL_DRAW_LIMIT = 10_000


class ExhaustedRetries(RuntimeError):
    pass


@dataclass(frozen=True)
class KeywordPool:
    """Unit posts grouped by keyword; keywords are kept in sorted order."""

    keywords: tuple[str, ...]
    posts_by_keyword: Mapping[str, tuple[AnnotatedPost, ...]]

    @property
    def k(self) -> int:
        return len(self.keywords)

    def __len__(self):
        return sum(len(v) for v in self.posts_by_keyword.values())

    def composition(self, classify: Callable[[AnnotatedPost], int], n_classes: int) -> np.ndarray:
        """Per-keyword class counts, shape ``(K, n_classes)``."""
        comp = np.zeros((self.k, n_classes), dtype=np.int64)
        for i, kw in enumerate(self.keywords):
            for post in self.posts_by_keyword[kw]:
                comp[i, classify(post)] += 1
        return comp


def keyword_pool(unit_posts: Sequence[AnnotatedPost]) -> KeywordPool:
    groups: dict[str, list[AnnotatedPost]] = {}
    for post in unit_posts:
        groups.setdefault(post.keyword or EMPTY_KEYWORD, []).append(post)
    keywords = tuple(sorted(groups))
    return KeywordPool(keywords, {k: tuple(groups[k]) for k in keywords})


@dataclass
class BootstrapResult:
    samples: np.ndarray
    summary: Optional[PercentileSummary]
    n_undefined: int
    params: dict
    kw_index: np.ndarray  # keyword replicate of each sample
    n_exhausted: int = 0
    warnings: list = field(default_factory=list)


def draw_keyword_multiplicities(gen: np.random.Generator, comp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Draw K keywords with replacement until the post pool is nonempty.

    Returns the multiplicities ``m_k`` and the pool composition
    ``sum_k m_k * comp[k]``.
    """
    k = comp.shape[0]
    for _ in range(_POOL_DRAW_LIMIT):
        mult = np.bincount(gen.integers(0, k, size=k), minlength=k)
        pool = mult @ comp
        if pool.sum() > 0:
            return mult, pool
    raise ExhaustedRetries("keyword draws never produced a nonempty post pool")


def _retrieval_replicate(args) -> tuple[np.ndarray, int]:
    comp, b, b_post, stream, definition, retry_budget = args
    gen = stream.derive("kw", b).generator()
    _, pool = draw_keyword_multiplicities(gen, comp)
    size = int(pool.sum())
    probs = pool / size
    # Drawing |P_b| posts with replacement and tallying their groups is
    # exactly a multinomial draw over the pool's group composition.
    counts = gen.multinomial(size, probs, size=b_post)
    values = prevalence_array(counts, definition)
    bad = np.flatnonzero(np.isnan(values))
    feasible = pool[0] + pool[1] > 0 if definition is PrevalenceDefinition.Restricted else True
    attempts = 0
    while bad.size and feasible and attempts < retry_budget:
        redraw = gen.multinomial(size, probs, size=bad.size)
        values[bad] = prevalence_array(redraw, definition)
        bad = bad[np.isnan(values[bad])]
        attempts += 1
    return values, int(bad.size)


def map_replicates(fn, tasks: list, workers: int = 1) -> list:
    """Apply ``fn`` to every task, in order, optionally across processes."""
    if workers <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=chunk))


def bootstrap_retrieval(
    pool: KeywordPool,
    effective_labels: Optional[Mapping[str, LabelCategory]] = None,
    b_kw: int = 500,
    b_post: int = 500,
    stream: Optional[RandomStream] = None,
    definition: PrevalenceDefinition = PrevalenceDefinition.Restricted,
    retry_budget: int = RETRY_BUDGET,
    workers: int = 1,
) -> BootstrapResult:
    """Keyword-then-post bootstrap of prevalence.

    Each keyword replicate draws K keywords with replacement, builds the
    post pool with every post of keyword k repeated m_k times, then draws
    ``b_post`` same-size post resamples from it. A post resample whose
    restricted denominator is zero is redrawn up to ``retry_budget`` times
    before being recorded as undefined.

    Parameters
    ----------
    pool : KeywordPool
    effective_labels : mapping of post_id to LabelCategory, optional
        Labels to score; defaults to agreed-else-junior.
    b_kw, b_post : int
        Keyword and post replicate counts.
    stream : RandomStream
        Keyword replicate ``b`` uses ``stream.derive("kw", b)``.
    definition : PrevalenceDefinition
    retry_budget : int
    workers : int
        Processes used across keyword replicates; results do not depend on it.
    """
    if b_kw < 1 or b_post < 1:
        raise ValueError("b_kw and b_post must be >= 1")
    if pool.k == 0:
        raise ValueError("keyword pool is empty")
    if stream is None:
        stream = RandomStream(0)
    if effective_labels is None:
        classify = lambda post: int(group_label(effective_label(post)))  # noqa: E731
    else:
        classify = lambda post: int(group_label(effective_labels[post.post_id]))  # noqa: E731
    comp = pool.composition(classify, 3)
    tasks = [(comp, b, b_post, stream, definition, retry_budget) for b in range(b_kw)]
    results = map_replicates(_retrieval_replicate, tasks, workers)
    values = np.concatenate([r[0] for r in results])
    kw_index = np.repeat(np.arange(b_kw), b_post)
    defined = ~np.isnan(values)
    samples = values[defined]
    n_exhausted = sum(r[1] for r in results)
    warnings = [f"exhausted_retries:{n_exhausted}"] if n_exhausted else []
    return BootstrapResult(
        samples=samples,
        summary=percentile_summary(samples) if samples.size else None,
        n_undefined=int((~defined).sum()),
        params={"b_kw": b_kw, "b_post": b_post, "seed": stream.master_seed},
        kw_index=kw_index[defined],
        n_exhausted=n_exhausted,
        warnings=warnings,
    )
