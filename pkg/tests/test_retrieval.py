import numpy as np
import pytest

from misprev.labels import EMPTY_KEYWORD, LabelCategory, PrevalenceDefinition
from misprev.retrieval import bootstrap_retrieval, keyword_pool
from misprev.stats import RandomStream
from misprev.validation import enumerate_bootstrap_exact

from _util import post

L = LabelCategory
R = PrevalenceDefinition.Restricted
T = PrevalenceDefinition.Total


def cluster_se(res):
    """Standard error of the grand mean, clustering samples by keyword replicate."""
    idx = res.kw_index
    means = np.array([res.samples[idx == b].mean() for b in np.unique(idx)])
    return means.std(ddof=1) / np.sqrt(means.size)


def test_pool_all_empty_keyword():
    posts = [post(0), post(1), post(2)]
    pool = keyword_pool(posts)
    assert pool.keywords == (EMPTY_KEYWORD,) and pool.k == 1 and len(pool) == 3


def test_pool_grouping():
    p1, p2, p3 = post(0, keyword="a"), post(1, keyword="a"), post(1, keyword="b")
    pool = keyword_pool([p1, p2, p3])
    assert pool.k == 2
    assert pool.posts_by_keyword == {"a": (p1, p2), "b": (p3,)}


def test_pool_mixed_with_sentinel():
    pool = keyword_pool([post(0, keyword="a"), post(1, keyword="b"), post(2)])
    assert pool.k == 3 and EMPTY_KEYWORD in pool.keywords
    pool = keyword_pool([post(0, keyword="a"), post(1, keyword="a"), post(2)])
    assert pool.k == 2


def test_homogeneous_pool():
    pool = keyword_pool([post(0) for _ in range(5)])
    res = bootstrap_retrieval(pool, None, 20, 20, RandomStream(1))
    assert np.all(res.samples == 1.0)
    assert (res.summary.p2_5, res.summary.p97_5) == (1.0, 1.0)


def test_single_keyword_is_plain_post_bootstrap():
    posts = [post(0) for _ in range(30)] + [post(1) for _ in range(170)] + [post(2) for _ in range(100)]
    res = bootstrap_retrieval(keyword_pool(posts), None, 200, 200, RandomStream(2), T)
    n, p = 300, 0.1
    # total prevalence of a same-size resample is Binomial(n, p) / n
    assert abs(res.summary.mean - p) < 3 * np.sqrt(p * (1 - p) / n / res.samples.size) * 3
    assert res.samples.var() == pytest.approx(p * (1 - p) / n, rel=0.05)


def test_two_keyword_fixture_against_exact():
    # keyword draws: (a,a) -> 1, (b,b) -> 0, (a,b)/(b,a) -> mean 1/3; exact mean 5/12
    pool = keyword_pool([post(0, keyword="a"), post(1, keyword="b"), post(1, keyword="b")])
    exact = enumerate_bootstrap_exact(pool, None, R)
    assert exact.mean == pytest.approx(5 / 12, abs=1e-12)
    res = bootstrap_retrieval(pool, None, 2000, 50, RandomStream(3), R)
    assert abs(res.summary.mean - exact.mean) < 3 * exact.standard_error(2000, 50)


def test_sample_accounting_and_range():
    posts = [post(g, keyword=k) for g, k in [(0, "a"), (2, "a"), (1, "b"), (2, "c"), (0, "c")]]
    res = bootstrap_retrieval(keyword_pool(posts), None, 50, 40, RandomStream(4), R)
    assert res.samples.size + res.n_undefined == 50 * 40
    assert np.all((res.samples >= 0) & (res.samples <= 1))
    assert res.params == {"b_kw": 50, "b_post": 40, "seed": 4}


def test_infeasible_replicates_are_counted():
    # drawing only keyword b leaves a pool with no mis/legit posts
    posts = [post(0, keyword="a"), post(2, keyword="b")]
    res = bootstrap_retrieval(keyword_pool(posts), None, 400, 10, RandomStream(5), R)
    assert res.n_undefined % 10 == 0 and res.n_undefined > 0
    assert res.samples.size + res.n_undefined == 4000
    assert res.warnings == [f"exhausted_retries:{res.n_undefined}"]
    # with a feasible pool, retries remove every undefined resample
    feasible = [post(0, keyword="a"), post(2, keyword="a")]
    ok = bootstrap_retrieval(keyword_pool(feasible), None, 20, 50, RandomStream(5), R)
    assert ok.n_undefined == 0 and np.all(ok.samples == 1.0)


def test_effective_label_override():
    posts = [post(L.Borderline, L.MisDisinformation), post(1)]
    pool = keyword_pool(posts)
    res = bootstrap_retrieval(pool, None, 5, 5, RandomStream(1), T)
    junior = {p.post_id: p.junior_label for p in posts}
    res_junior = bootstrap_retrieval(pool, junior, 5, 5, RandomStream(1), T)
    assert res.samples.max() > 0
    assert np.all(res_junior.samples == 0)


def test_keyword_concentration_widens():
    spread = [post(0, keyword=f"k{i % 10}") for i in range(20)] + [
        post(1, keyword=f"k{i % 10}") for i in range(180)
    ]
    concentrated = [post(0, keyword="k0") for _ in range(20)] + [
        post(1, keyword=f"k{i % 10}") for i in range(180)
    ]
    a = bootstrap_retrieval(keyword_pool(spread), None, 300, 100, RandomStream(6), R)
    b = bootstrap_retrieval(keyword_pool(concentrated), None, 300, 100, RandomStream(6), R)
    assert b.samples.var() >= a.samples.var()


def test_worker_count_does_not_change_output():
    posts = [post(g, keyword=k) for g, k in [(0, "a"), (2, "a"), (1, "b"), (2, "c"), (0, "c"), (1, "c")]]
    pool = keyword_pool(posts)
    a = bootstrap_retrieval(pool, None, 30, 20, RandomStream(9), R, workers=1)
    b = bootstrap_retrieval(pool, None, 30, 20, RandomStream(9), R, workers=3)
    assert np.array_equal(a.samples, b.samples)


def test_replicate_order_independence():
    from misprev.retrieval import _retrieval_replicate

    posts = [post(g, keyword=k) for g, k in [(0, "a"), (2, "a"), (1, "b"), (1, "c")]]
    pool = keyword_pool(posts)
    comp = pool.composition(lambda p: int(p.junior_label is not L.MisDisinformation), 3)
    stream = RandomStream(10)
    forward = [_retrieval_replicate((comp, b, 5, stream, R, 100))[0] for b in range(10)]
    backward = [_retrieval_replicate((comp, b, 5, stream, R, 100))[0] for b in reversed(range(10))][::-1]
    assert all(np.array_equal(x, y) for x, y in zip(forward, backward))


def test_argument_validation():
    with pytest.raises(ValueError):
        bootstrap_retrieval(keyword_pool([post(0)]), None, 0, 5, RandomStream(1))
    with pytest.raises(ValueError):
        bootstrap_retrieval(keyword_pool([]), None, 5, 5, RandomStream(1))
