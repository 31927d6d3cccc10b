"""Joint keyword/post bootstrap and annotation simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from misprev.annotation import ReferenceMatrix, reference_matrix_for
from misprev.labels import AnnotatedPost, PrevalenceDefinition, group_label
from misprev.retrieval import draw_keyword_multiplicities, keyword_pool, map_replicates
from misprev.stats import PercentileSummary, RandomStream, percentile_summary, prevalence_array

__all__ = ["JointResult", "estimate_joint"]


@dataclass
class JointResult:
    samples: np.ndarray
    summary: Optional[PercentileSummary]
    n_undefined: int
    params: dict
    matrix: ReferenceMatrix
    warnings: list = field(default_factory=list)


def _cell_class(post: AnnotatedPost) -> int:
    # 0-2: double-coded by agreed group, 3-5: junior-only by junior group
    if post.agreed_label is not None:
        return int(group_label(post.agreed_label))
    return 3 + int(group_label(post.junior_label))


def _joint_replicate(args) -> np.ndarray:
    comp, probs_m, b, b_post, s, stream, definition = args
    gen = stream.derive("kw", b).generator()
    _, pool = draw_keyword_multiplicities(gen, comp)
    size = int(pool.sum())
    resampled = gen.multinomial(size, pool / size, size=b_post)  # (b_post, 6)
    n_r = np.broadcast_to(resampled[:, None, 3:], (b_post, s, 3))
    tables = gen.multinomial(n_r, probs_m)  # (b_post, s, 3, 3)
    corrected = resampled[:, None, :3] + tables.sum(axis=2)
    return prevalence_array(corrected, definition).ravel()


def estimate_joint(
    unit_posts: Sequence[AnnotatedPost],
    b_kw: int = 100,
    b_post: int = 100,
    s: int = 100,
    stream: Optional[RandomStream] = None,
    definition: PrevalenceDefinition = PrevalenceDefinition.Restricted,
    matrix: Optional[ReferenceMatrix] = None,
    workers: int = 1,
) -> JointResult:
    """Prevalence distribution over a ``b_kw x b_post x s`` grid.

    The reference matrix is estimated once from all double-coded posts of
    the unit. For every post resample, double-coded posts contribute their
    agreed group and junior-only posts are redistributed by multinomial
    simulation, both counted with their resampling multiplicity.

    Samples are returned in ``(b, t, sigma)`` row-major order with
    undefined values removed.
    """
    if min(b_kw, b_post, s) < 1:
        raise ValueError("b_kw, b_post and s must be >= 1")
    if not unit_posts:
        raise ValueError("no posts in unit")
    if stream is None:
        stream = RandomStream(0)
    warnings: list[str] = []
    if matrix is None:
        matrix, warnings = reference_matrix_for(unit_posts)
    pool = keyword_pool(unit_posts)
    comp = pool.composition(_cell_class, 6)
    tasks = [(comp, matrix.probs, b, b_post, s, stream, definition) for b in range(b_kw)]
    values = np.concatenate(map_replicates(_joint_replicate, tasks, workers))
    defined = ~np.isnan(values)
    samples = values[defined]
    return JointResult(
        samples=samples,
        summary=percentile_summary(samples) if samples.size else None,
        n_undefined=int((~defined).sum()),
        params={"b_kw": b_kw, "b_post": b_post, "s": s, "seed": stream.master_seed},
        matrix=matrix,
        warnings=warnings,
    )
