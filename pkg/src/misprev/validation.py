"""Synthetic corpora with known ground truth, exact-enumeration oracles for
the stochastic estimators, and coverage experiments."""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from misprev.annotation import ReferenceMatrix, simulate_annotation
from misprev.ingest import Corpus, Provenance
from misprev.joint import estimate_joint
from misprev.labels import (
    EMPTY_KEYWORD,
    AnnotatedPost,
    GroupedCounts,
    LabelCategory,
    LabelGroup,
    Platform,
    PrevalenceDefinition,
    count_groups,
    effective_label,
    group_label,
)
from misprev.retrieval import KeywordPool, bootstrap_retrieval, keyword_pool
from misprev.stats import RandomStream, WilsonInterval, prevalence, wilson_interval, z_for_alpha

__all__ = [
    "BadSpec",
    "TooLarge",
    "KeywordModel",
    "ViewModel",
    "SynthSpec",
    "GroundTruth",
    "generate_corpus",
    "ExactDistribution",
    "enumerate_multinomial_exact",
    "BootstrapMoments",
    "enumerate_bootstrap_exact",
    "CoverageReport",
    "coverage_experiment",
    "chi_square_against_exact",
    "oracle_check",
    "MULTINOMIAL_ENUM_LIMIT",
]

MULTINOMIAL_ENUM_LIMIT = 12
BOOTSTRAP_MAX_KEYWORDS = 3
BOOTSTRAP_MAX_POSTS_PER_KEYWORD = 3

_GROUP_CATEGORIES = {
    LabelGroup.MisDisinfo: (LabelCategory.MisDisinformation,),
    LabelGroup.Legit: (LabelCategory.CredibleInformative, LabelCategory.Unverifiable),
    LabelGroup.AllTheRest: (
        LabelCategory.Borderline,
        LabelCategory.Abusive,
        LabelCategory.Irrelevant,
        LabelCategory.OtherLanguage,
        LabelCategory.DontKnow,
    ),
}


class BadSpec(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class KeywordModel:
    """``n_keywords = 0`` puts every post under the empty keyword.

    Each true group spreads over keywords with weights drawn from a
    symmetric Dirichlet with parameter ``concentration``; small values
    pile a group onto few keywords, ``None`` means exactly uniform.
    """

    n_keywords: int = 0
    concentration: Optional[float] = None


@dataclass(frozen=True)
class ViewModel:
    """Lognormal view counts; optionally the corpus is a view-weighted
    sample without replacement from a population ``population_factor``
    times larger."""

    mean: float = 8.0
    sigma: float = 2.0
    view_weighted: bool = False
    population_factor: int = 5


@dataclass(frozen=True)
class SynthSpec:
    n_posts: int
    true_group_probs: tuple[float, float, float]
    junior_confusion: tuple[tuple[float, float, float], ...] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    double_coded_fraction: float = 0.2
    keyword_model: KeywordModel = KeywordModel()
    view_model: ViewModel = ViewModel()
    seed: int = 0

    def __post_init__(self):
        probs = np.asarray(self.true_group_probs, dtype=float)
        conf = np.asarray(self.junior_confusion, dtype=float)
        if self.n_posts < 1:
            raise BadSpec("n_posts must be >= 1")
        if probs.shape != (3,) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-9:
            raise BadSpec(f"true_group_probs is not a probability vector: {self.true_group_probs}")
        if conf.shape != (3, 3) or np.any(conf < 0) or np.any(np.abs(conf.sum(axis=1) - 1) > 1e-9):
            raise BadSpec("junior_confusion must be a 3x3 row-stochastic matrix")
        if not 0.0 <= self.double_coded_fraction <= 1.0:
            raise BadSpec("double_coded_fraction must lie in [0, 1]")
        km = self.keyword_model
        if km.n_keywords < 0 or (km.concentration is not None and km.concentration <= 0):
            raise BadSpec("invalid keyword_model")
        vm = self.view_model
        if vm.sigma < 0 or vm.population_factor < 1:
            raise BadSpec("invalid view_model")
        if not 0 <= self.seed < 2**64:
            raise BadSpec("seed must be a 64-bit unsigned integer")

    def true_prevalence(self, definition: PrevalenceDefinition) -> float:
        mis, legit, _ = self.true_group_probs
        if definition is PrevalenceDefinition.Total:
            return mis
        if mis + legit == 0:
            raise BadSpec("restricted prevalence undefined when mis and legit probabilities are 0")
        return mis / (mis + legit)

    @classmethod
    def from_dict(cls, data: Mapping) -> "SynthSpec":
        data = dict(data)
        try:
            data["true_group_probs"] = tuple(data["true_group_probs"])
            if "junior_confusion" in data:
                data["junior_confusion"] = tuple(tuple(r) for r in data["junior_confusion"])
            if "keyword_model" in data:
                data["keyword_model"] = KeywordModel(**data["keyword_model"])
            if "view_model" in data:
                data["view_model"] = ViewModel(**data["view_model"])
            return cls(**data)
        except (KeyError, TypeError) as exc:
            raise BadSpec(f"invalid SynthSpec: {exc}") from exc

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GroundTruth:
    """Latent true group per post; never passed to an estimator."""

    true_group: Mapping[str, LabelGroup]

    def counts(self) -> GroupedCounts:
        tally = Counter(self.true_group.values())
        return GroupedCounts(tally[LabelGroup.MisDisinfo], tally[LabelGroup.Legit], tally[LabelGroup.AllTheRest])


def generate_corpus(spec: SynthSpec, stream: Optional[RandomStream] = None) -> tuple[Corpus, GroundTruth]:
    """Draw a synthetic annotated corpus and its ground truth."""
    if stream is None:
        stream = RandomStream(spec.seed)
    gen = stream.generator()
    vm = spec.view_model
    pop = spec.n_posts * vm.population_factor if vm.view_weighted else spec.n_posts

    views = np.floor(gen.lognormal(vm.mean, vm.sigma, size=pop)).astype(np.int64)
    chosen = np.arange(pop)
    if vm.view_weighted:
        w = views + 1.0
        chosen = np.sort(gen.choice(pop, size=spec.n_posts, replace=False, p=w / w.sum()))
    n = spec.n_posts
    views = views[chosen]

    truth = gen.choice(3, size=n, p=np.asarray(spec.true_group_probs, dtype=float))
    conf = np.asarray(spec.junior_confusion, dtype=float)
    cum = np.cumsum(conf, axis=1)
    u = gen.random(n)
    junior_group = np.minimum((u[:, None] > cum[truth]).sum(axis=1), 2)
    double = gen.random(n) < spec.double_coded_fraction
    pick_junior = gen.integers(0, 1 << 30, size=n)
    pick_agreed = gen.integers(0, 1 << 30, size=n)

    km = spec.keyword_model
    if km.n_keywords == 0:
        kw_ids = np.full(n, -1)
    else:
        if km.concentration is None:
            weights = np.full((3, km.n_keywords), 1.0 / km.n_keywords)
        else:
            weights = gen.dirichlet(np.full(km.n_keywords, km.concentration), size=3)
        kw_cum = np.cumsum(weights, axis=1)
        kw_ids = np.minimum((gen.random(n)[:, None] > kw_cum[truth]).sum(axis=1), km.n_keywords - 1)

    groups = list(LabelGroup)
    posts = []
    truth_map = {}
    for i, (t, j, d, pj, pa, kw, v) in enumerate(
        zip(truth.tolist(), junior_group.tolist(), double.tolist(), pick_junior.tolist(),
            pick_agreed.tolist(), kw_ids.tolist(), views.tolist())
    ):
        jcats = _GROUP_CATEGORIES[groups[j]]
        junior = jcats[pj % len(jcats)]
        agreed = None
        if d:
            tcats = _GROUP_CATEGORIES[groups[t]]
            agreed = junior if j == t else tcats[pa % len(tcats)]
        pid = f"s{i:07d}"
        posts.append(
            AnnotatedPost(
                post_id=pid,
                platform=Platform.TikTok,
                language="xx",
                keyword=EMPTY_KEYWORD if kw < 0 else f"kw{kw:03d}",
                views=v,
                junior_label=junior,
                senior_label=agreed,
                agreed_label=agreed,
            )
        )
        truth_map[pid] = groups[t]
    prov = Provenance(source="synthetic", rows_read=n, rows_kept=n)
    return Corpus(tuple(posts), prov), GroundTruth(truth_map)


# --- exact oracles ---------------------------------------------------------


def _compositions(total: int, parts: int):
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial_pmf(counts: Sequence[int], probs: Sequence[float]) -> float:
    n = sum(counts)
    coef = math.factorial(n)
    out = 1.0
    for c, p in zip(counts, probs):
        coef //= math.factorial(c)
        if c:
            if p == 0:
                return 0.0
            out *= p**c
    return coef * out


def _exact_prevalence(counts: Sequence[int], definition: PrevalenceDefinition) -> Optional[Fraction]:
    mis, legit, rest = counts
    denom = mis + legit if definition is PrevalenceDefinition.Restricted else mis + legit + rest
    return Fraction(mis, denom) if denom else None


@dataclass(frozen=True)
class ExactDistribution:
    """Exact distribution of a prevalence; the ``None`` key is "undefined"."""

    probs: Mapping[Optional[Fraction], float]

    @property
    def p_undefined(self) -> float:
        return self.probs.get(None, 0.0)

    def defined(self) -> dict[Fraction, float]:
        return {k: v for k, v in self.probs.items() if k is not None}

    def mean(self) -> float:
        d = self.defined()
        mass = sum(d.values())
        return sum(float(k) * v for k, v in d.items()) / mass

    def variance(self) -> float:
        d = self.defined()
        mass = sum(d.values())
        mu = self.mean()
        return sum((float(k) - mu) ** 2 * v for k, v in d.items()) / mass


def enumerate_multinomial_exact(
    n_r,
    matrix: ReferenceMatrix,
    definition: PrevalenceDefinition,
    n_d=(0, 0, 0),
) -> ExactDistribution:
    """Exact prevalence distribution after multinomial reassignment.

    Every outcome of the three row-wise multinomials is enumerated;
    feasible only for at most :data:`MULTINOMIAL_ENUM_LIMIT` junior-only
    posts.
    """
    n_r = tuple(int(v) for v in (n_r.as_tuple() if isinstance(n_r, GroupedCounts) else n_r))
    n_d = tuple(int(v) for v in (n_d.as_tuple() if isinstance(n_d, GroupedCounts) else n_d))
    if sum(n_r) > MULTINOMIAL_ENUM_LIMIT:
        raise TooLarge(f"{sum(n_r)} junior-only posts exceed the enumeration limit {MULTINOMIAL_ENUM_LIMIT}")
    probs = np.asarray(matrix.probs, dtype=float)
    row_outcomes = []
    for i in range(3):
        outs = []
        for comp in _compositions(n_r[i], 3):
            p = _multinomial_pmf(comp, probs[i])
            if p > 0:
                outs.append((comp, p))
        row_outcomes.append(outs)
    dist: dict[Optional[Fraction], float] = defaultdict(float)
    for (c0, p0), (c1, p1), (c2, p2) in itertools.product(*row_outcomes):
        corrected = [n_d[j] + c0[j] + c1[j] + c2[j] for j in range(3)]
        dist[_exact_prevalence(corrected, definition)] += p0 * p1 * p2
    return ExactDistribution(dict(dist))


@dataclass(frozen=True)
class BootstrapMoments:
    """Exact moments of one keyword/post bootstrap replicate.

    Post resamples with an undefined prevalence are conditioned away
    within each keyword draw (the estimator redraws them); keyword draws
    whose pool can never give a defined value are excluded and their
    probability reported as ``p_undefined_keyword_draw``.
    """

    mean: float
    variance: float
    between_variance: float
    within_variance: float
    p_undefined_keyword_draw: float
    n_keyword_draws: int

    def standard_error(self, b_kw: int, b_post: int) -> float:
        """Monte Carlo standard error of the mean of a ``b_kw x b_post`` run."""
        return math.sqrt((self.between_variance + self.within_variance / b_post) / b_kw)


def enumerate_bootstrap_exact(
    pool: KeywordPool,
    labels: Optional[Mapping[str, LabelCategory]] = None,
    definition: PrevalenceDefinition = PrevalenceDefinition.Restricted,
) -> BootstrapMoments:
    """Exact replicate moments of the two-level bootstrap.

    Enumerates all K**K ordered keyword draws and, for each, every
    same-size resample of the individual posts in the pool (as count
    vectors over distinct posts with multinomial probabilities).
    """
    k = pool.k
    if k == 0:
        raise ValueError("empty keyword pool")
    if k > BOOTSTRAP_MAX_KEYWORDS or any(
        len(v) > BOOTSTRAP_MAX_POSTS_PER_KEYWORD for v in pool.posts_by_keyword.values()
    ):
        raise TooLarge("bootstrap oracle needs K <= 3 and at most 3 posts per keyword")
    if labels is None:
        labels = {p.post_id: effective_label(p) for v in pool.posts_by_keyword.values() for p in v}

    per_draw_cache: dict[tuple[int, ...], Optional[tuple[float, float]]] = {}
    weight = 1.0 / k**k
    draws = []
    for draw in itertools.product(range(k), repeat=k):
        mult = tuple(draw.count(i) for i in range(k))
        if mult not in per_draw_cache:
            per_draw_cache[mult] = _post_resample_moments(pool, labels, definition, mult)
        draws.append(per_draw_cache[mult])

    p_bad = sum(weight for d in draws if d is None)
    good = [d for d in draws if d is not None]
    if not good:
        raise ValueError("no keyword draw yields a defined prevalence")
    w = 1.0 / len(good)
    mean = sum(m for m, _ in good) * w
    between = sum((m - mean) ** 2 for m, _ in good) * w
    within = sum(v for _, v in good) * w
    return BootstrapMoments(
        mean=mean,
        variance=between + within,
        between_variance=between,
        within_variance=within,
        p_undefined_keyword_draw=p_bad,
        n_keyword_draws=k**k,
    )


def _post_resample_moments(pool, labels, definition, mult) -> Optional[tuple[float, float]]:
    items = []  # (group index, selection weight) per distinct post
    for kw, m in zip(pool.keywords, mult):
        if m == 0:
            continue
        for post in pool.posts_by_keyword[kw]:
            items.append((int(group_label(labels[post.post_id])), m))
    size = sum(m for _, m in items)
    if size == 0:
        return None
    probs = [m / size for _, m in items]
    mass = first = second = 0.0
    for comp in _compositions(size, len(items)):
        counts = [0, 0, 0]
        for (g, _), c in zip(items, comp):
            counts[g] += c
        value = _exact_prevalence(counts, definition)
        if value is None:
            continue
        p = _multinomial_pmf(comp, probs)
        mass += p
        first += p * float(value)
        second += p * float(value) ** 2
    if mass == 0:
        return None
    mean = first / mass
    return mean, max(second / mass - mean * mean, 0.0)


# --- coverage ---------------------------------------------------------------

_DEFAULT_COVERAGE_PARAMS = {"alpha": 0.05, "s": 200, "b_kw": 50, "b_post": 50, "sims": 20}


@dataclass
class CoverageReport:
    method: str
    definition: str
    trials: int
    covered: int
    n_failed: int
    true_prevalence: float
    coverage: float
    coverage_interval: WilsonInterval
    mean_width: float
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["coverage_interval"] = asdict(self.coverage_interval)
        return out


def _interval(method: str, posts, stream: RandomStream, definition, params) -> Optional[tuple[float, float]]:
    if method == "baseline":
        counts = count_groups(effective_label(p) for p in posts)
        n = counts.n_mis + counts.n_legit if definition is PrevalenceDefinition.Restricted else counts.total
        if n == 0:
            return None
        ci = wilson_interval(counts.n_mis, n, z_for_alpha(params["alpha"]))
        return ci.lower, ci.upper
    if method == "annotation":
        res = simulate_annotation(posts, None, params["s"], stream, definition)
    elif method == "retrieval":
        res = bootstrap_retrieval(keyword_pool(posts), None, params["b_kw"], params["b_post"], stream, definition)
    elif method == "joint":
        sims = params["sims"]
        res = estimate_joint(posts, sims, sims, sims, stream, definition)
    else:
        raise ValueError(f"unknown method {method!r}")
    if res.summary is None:
        return None
    return res.summary.p2_5, res.summary.p97_5


def coverage_experiment(
    spec: SynthSpec,
    trials: int,
    method: str = "baseline",
    stream: Optional[RandomStream] = None,
    definition: PrevalenceDefinition = PrevalenceDefinition.Restricted,
    params: Optional[Mapping] = None,
) -> CoverageReport:
    """Empirical coverage of an estimator's 95% interval on synthetic corpora.

    Trial ``i`` generates its corpus from ``stream.derive("corpus", i)``
    and runs the estimator on ``stream.derive("estimate", i)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if stream is None:
        stream = RandomStream(spec.seed)
    merged = dict(_DEFAULT_COVERAGE_PARAMS)
    merged.update(params or {})
    truth = spec.true_prevalence(definition)
    covered = failed = 0
    widths = []
    for i in range(trials):
        corpus, _ = generate_corpus(spec, stream.derive("corpus", i))
        ci = _interval(method, corpus.posts, stream.derive("estimate", i), definition, merged)
        if ci is None:
            failed += 1
            continue
        lo, hi = ci
        widths.append(hi - lo)
        covered += lo <= truth <= hi
    done = trials - failed
    return CoverageReport(
        method=method,
        definition=definition.value,
        trials=trials,
        covered=covered,
        n_failed=failed,
        true_prevalence=truth,
        coverage=covered / done if done else float("nan"),
        coverage_interval=wilson_interval(covered, max(done, 1), z_for_alpha(merged["alpha"])),
        mean_width=float(np.mean(widths)) if widths else float("nan"),
        params=merged,
    )


# --- oracle comparison -----------------------------------------------------


def chi_square_against_exact(samples, exact: ExactDistribution, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Goodness of fit of simulated prevalence values to an exact distribution.

    Cells with expected count below ``min_expected`` are pooled into one.
    Returns ``(statistic, p_value, degrees_of_freedom)``.
    """
    from scipy.stats import chi2

    samples = np.asarray(samples, dtype=float)
    n = samples.size
    defined = exact.defined()
    mass = sum(defined.values())
    values = sorted(defined)
    observed_by_value = Counter(samples.tolist())
    obs, exp = [], []
    pooled_obs = pooled_exp = 0.0
    matched = 0
    for v in values:
        e = n * defined[v] / mass
        o = observed_by_value.get(float(v), 0)
        matched += o
        if e < min_expected:
            pooled_obs += o
            pooled_exp += e
        else:
            obs.append(o)
            exp.append(e)
    if pooled_exp > 0:
        obs.append(pooled_obs)
        exp.append(pooled_exp)
    if matched != n:
        # a simulated value outside the exact support
        return float("inf"), 0.0, max(len(obs) - 1, 1)
    obs = np.asarray(obs, dtype=float)
    exp = np.asarray(exp, dtype=float)
    dof = len(obs) - 1
    if dof < 1:
        return 0.0, 1.0, 0
    stat = float(((obs - exp) ** 2 / exp).sum())
    return stat, float(chi2.sf(stat, dof)), dof


def oracle_check(
    spec: SynthSpec,
    stream: Optional[RandomStream] = None,
    definition: PrevalenceDefinition = PrevalenceDefinition.Restricted,
    runs: int = 100_000,
    level: float = 0.001,
) -> dict:
    """Compare both stochastic estimators with their exact oracles on a
    corpus drawn from ``spec`` (which must be small enough to enumerate)."""
    from misprev.annotation import reference_matrix_for, split_counts

    if stream is None:
        stream = RandomStream(spec.seed)
    corpus, _ = generate_corpus(spec, stream.derive("corpus", 0))
    posts = list(corpus.posts)
    checks = []

    matrix, _ = reference_matrix_for(posts)
    n_d, n_r = split_counts(posts)
    try:
        exact = enumerate_multinomial_exact(n_r, matrix, definition, n_d)
    except TooLarge as exc:
        checks.append({"check": "annotation", "skipped": str(exc)})
    else:
        sim = simulate_annotation(posts, matrix, runs, stream.derive("annotation", 0), definition)
        stat, p, dof = chi_square_against_exact(sim.samples, exact)
        checks.append(
            {
                "check": "annotation",
                "statistic": stat,
                "dof": dof,
                "p_value": p,
                "exact_mean": exact.mean() if exact.defined() else None,
                "simulated_mean": sim.summary.mean if sim.summary else None,
                "passed": p > level,
            }
        )

    pool = keyword_pool(posts)
    try:
        moments = enumerate_bootstrap_exact(pool, None, definition)
    except (TooLarge, ValueError) as exc:
        checks.append({"check": "retrieval", "skipped": str(exc)})
    else:
        b_post = 100
        b_kw = max(1, runs // b_post)
        boot = bootstrap_retrieval(pool, None, b_kw, b_post, stream.derive("retrieval", 0), definition)
        se = moments.standard_error(b_kw, b_post)
        diff = boot.summary.mean - moments.mean
        z = diff / se if se > 0 else (0.0 if abs(diff) < 1e-12 else float("inf"))
        checks.append(
            {
                "check": "retrieval",
                "exact_mean": moments.mean,
                "bootstrap_mean": boot.summary.mean,
                "standard_error": se,
                "z": z,
                "passed": abs(z) <= 3.0,
            }
        )
    return {"n_posts": len(posts), "definition": definition.value, "checks": checks}
