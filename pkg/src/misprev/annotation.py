"""Junior-to-agreed transition estimates and multinomial propagation of
annotation error onto junior-only posts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from misprev.labels import AnnotatedPost, LabelGroup, PrevalenceDefinition, group_label
from misprev.stats import PercentileSummary, RandomStream, percentile_summary, prevalence_array

__all__ = [
    "EmptyDoubleCoded",
    "ReferenceMatrix",
    "AnnotationSimResult",
    "build_reference_matrix",
    "reference_matrix_for",
    "split_counts",
    "simulate_annotation",
    "RUN_BLOCK",
]

# Runs are drawn in fixed-size blocks, one substream per block.
RUN_BLOCK = 256


class EmptyDoubleCoded(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ReferenceMatrix:
    """Row-stochastic junior-group to agreed-group transition matrix.

    Rows and columns are indexed by :class:`LabelGroup` values. Rows with
    no support fall back to the identity row and are listed in
    ``fallback_rows``.
    """

    probs: np.ndarray
    support: np.ndarray
    fallback_rows: frozenset = frozenset()

    @classmethod
    def identity(cls) -> "ReferenceMatrix":
        return cls(np.eye(3), np.zeros((3, 3), dtype=np.int64), frozenset(range(3)))

    @classmethod
    def from_support(cls, support) -> "ReferenceMatrix":
        support = np.asarray(support, dtype=np.int64)
        if support.shape != (3, 3) or np.any(support < 0):
            raise ValueError("support must be a nonnegative 3x3 count matrix")
        probs = np.eye(3)
        fallback = set()
        for i in range(3):
            total = support[i].sum()
            if total == 0:
                fallback.add(i)
            else:
                probs[i] = support[i] / total
        return cls(probs, support, frozenset(fallback))

    def to_dict(self) -> dict:
        return {
            "groups": [g.name for g in LabelGroup],
            "probs": self.probs.tolist(),
            "support": self.support.tolist(),
            "fallback_rows": sorted(LabelGroup(i).name for i in self.fallback_rows),
        }


def build_reference_matrix(double_coded: Sequence[AnnotatedPost]) -> ReferenceMatrix:
    """Estimate the transition matrix from double-coded posts.

    Raises
    ------
    EmptyDoubleCoded
        If no double-coded post is given.
    """
    support = np.zeros((3, 3), dtype=np.int64)
    for post in double_coded:
        if post.agreed_label is None:
            raise ValueError(f"post {post.post_id} has no agreed label")
        support[group_label(post.junior_label), group_label(post.agreed_label)] += 1
    if support.sum() == 0:
        raise EmptyDoubleCoded("no double-coded posts to estimate a reference matrix from")
    return ReferenceMatrix.from_support(support)


def reference_matrix_for(posts: Sequence[AnnotatedPost]) -> tuple[ReferenceMatrix, list[str]]:
    """Reference matrix of a unit plus any fallback warnings."""
    try:
        matrix = build_reference_matrix([p for p in posts if p.double_coded])
    except EmptyDoubleCoded:
        return ReferenceMatrix.identity(), ["identity_fallback:no_double_coded"]
    warnings = [f"identity_fallback_row:{LabelGroup(i).name}" for i in sorted(matrix.fallback_rows)]
    return matrix, warnings


def split_counts(posts: Sequence[AnnotatedPost]) -> tuple[np.ndarray, np.ndarray]:
    """Grouped agreed counts of double-coded posts and grouped junior counts of the rest."""
    n_d = np.zeros(3, dtype=np.int64)
    n_r = np.zeros(3, dtype=np.int64)
    for post in posts:
        if post.agreed_label is not None:
            n_d[group_label(post.agreed_label)] += 1
        else:
            n_r[group_label(post.junior_label)] += 1
    return n_d, n_r


@dataclass
class AnnotationSimResult:
    samples: np.ndarray
    summary: Optional[PercentileSummary]
    mean_correction: np.ndarray
    correction_p2_5: np.ndarray
    correction_p97_5: np.ndarray
    s: int
    n_undefined: int
    matrix: ReferenceMatrix
    n_d: np.ndarray
    n_r: np.ndarray
    warnings: list = field(default_factory=list)


def simulate_corrections(n_r, matrix: ReferenceMatrix, s: int, stream: RandomStream) -> np.ndarray:
    """Simulated junior-to-corrected tables, shape ``(s, 3, 3)``.

    Row ``i`` of each table is ``Multinomial(n_r[i], matrix.probs[i])``.
    """
    n_r = np.asarray(n_r, dtype=np.int64)
    tables = np.empty((s, 3, 3), dtype=np.int64)
    for block, start in enumerate(range(0, s, RUN_BLOCK)):
        stop = min(start + RUN_BLOCK, s)
        gen = stream.derive("sim", block).generator()
        n = np.broadcast_to(n_r, (stop - start, 3))
        tables[start:stop] = gen.multinomial(n, matrix.probs)
    return tables


def simulate_annotation(
    unit_posts: Sequence[AnnotatedPost],
    matrix: Optional[ReferenceMatrix],
    s: int,
    stream: RandomStream,
    definition: PrevalenceDefinition = PrevalenceDefinition.Restricted,
) -> AnnotationSimResult:
    """Propagate junior annotation error by multinomial simulation.

    Junior-only posts are redistributed across groups according to
    ``matrix`` in each of ``s`` runs; the simulated column totals are added
    to the agreed counts of the double-coded posts before computing
    prevalence.

    Parameters
    ----------
    unit_posts : sequence of AnnotatedPost
        Posts of one analysis unit.
    matrix : ReferenceMatrix or None
        Transition matrix; ``None`` estimates it from ``unit_posts``.
    s : int
        Number of simulation runs.
    stream : RandomStream
        Randomness for this unit; runs use ``stream.derive("sim", block)``.
    definition : PrevalenceDefinition

    Returns
    -------
    AnnotationSimResult
        Runs with an undefined prevalence are excluded from ``samples``
        and counted in ``n_undefined``.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    warnings: list[str] = []
    if matrix is None:
        matrix, warnings = reference_matrix_for(unit_posts)
    n_d, n_r = split_counts(unit_posts)
    tables = simulate_corrections(n_r, matrix, s, stream)
    corrected = n_d + tables.sum(axis=1)
    values = prevalence_array(corrected, definition)
    defined = ~np.isnan(values)
    samples = values[defined]
    summary = percentile_summary(samples) if samples.size else None
    lo, hi = np.percentile(tables, [2.5, 97.5], axis=0)
    return AnnotationSimResult(
        samples=samples,
        summary=summary,
        mean_correction=tables.mean(axis=0),
        correction_p2_5=lo,
        correction_p97_5=hi,
        s=s,
        n_undefined=int((~defined).sum()),
        matrix=matrix,
        n_d=n_d,
        n_r=n_r,
        warnings=warnings,
    )
