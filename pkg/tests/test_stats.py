import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorevo.stats import (SampleGroup, UndefinedEffectSize, compare, glass_delta, kruskal_wallis, midranks,
                             wilcoxon_rank_sum)


def brute_force_p(a, b):
    pooled = np.concatenate([a, b])
    ranks = midranks(pooled)
    n, N = len(a), len(pooled)
    center = n * (N + 1) / 2
    obs = abs(ranks[:n].sum() - center)
    hits = total = 0
    for idx in itertools.combinations(range(N), n):
        total += 1
        hits += abs(ranks[list(idx)].sum() - center) >= obs - 1e-9
    return hits / total


def test_smallest_separated_split():
    u, p = wilcoxon_rank_sum([1, 2], [3, 4])
    assert u == 0 and p == pytest.approx(1 / 3, abs=1e-12)


def test_five_vs_five():
    _, p = wilcoxon_rank_sum(range(1, 6), range(6, 11))
    assert p == pytest.approx(2 / 252, abs=1e-12)


def test_identical_values():
    assert wilcoxon_rank_sum([2, 2, 2], [2, 2])[1] == 1.0


def test_midranks_ties():
    assert midranks([3, 1, 3, 2]).tolist() == [3.5, 1.0, 3.5, 2.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.data())
def test_exact_matches_enumeration(n, m, data):
    vals = data.draw(st.lists(st.integers(0, 6), min_size=n + m, max_size=n + m))
    a, b = np.array(vals[:n], float), np.array(vals[n:], float)
    if len(set(vals)) == 1:
        return
    assert wilcoxon_rank_sum(a, b, method="exact")[1] == pytest.approx(brute_force_p(a, b), abs=1e-12)


def test_exact_against_scipy_without_ties():
    from scipy.stats import mannwhitneyu
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.permutation(14)
        a, b = x[:6], x[6:]
        ref = mannwhitneyu(a, b, method="exact").pvalue
        assert wilcoxon_rank_sum(a, b)[1] == pytest.approx(ref, abs=1e-12)


def test_approx_close_to_exact():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.normal(size=8), rng.normal(0.5, size=8)
        ex = wilcoxon_rank_sum(a, b, method="exact")[1]
        ap = wilcoxon_rank_sum(a, b, method="approx")[1]
        assert abs(ex - ap) < 0.02


def test_one_sided():
    _, greater = wilcoxon_rank_sum([5, 6, 7], [1, 2, 3], alternative="greater")
    _, less = wilcoxon_rank_sum([5, 6, 7], [1, 2, 3], alternative="less")
    assert greater == pytest.approx(0.05) and less == 1.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-500, 500), min_size=6, max_size=12, unique=True))
def test_monotone_transform_invariance(vals):
    h = len(vals) // 2
    a, b = np.array(vals[:h], float), np.array(vals[h:], float)
    assert wilcoxon_rank_sum(a, b)[1] == wilcoxon_rank_sum(np.cbrt(a) + a ** 3, np.cbrt(b) + b ** 3)[1]


def test_bad_inputs():
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([1], [2, 3])
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([1, 2], [2, 3], method="bogus")
    with pytest.raises(ValueError):
        kruskal_wallis([[1, 2], []])
    with pytest.raises(ValueError):
        SampleGroup("empty", ())


def test_kruskal_wallis_reference():
    h, p = kruskal_wallis([[1, 2], [3, 4], [5, 6]])
    assert h == pytest.approx(32 / 7, abs=1e-4)
    from scipy.stats import kruskal
    groups = [[1.0, 2.5, 2.5, 7], [3, 4, 4, 9], [5, 6, 0.5]]
    ref = kruskal(*groups)
    assert kruskal_wallis(groups) == pytest.approx((ref.statistic, ref.pvalue))


def test_glass_delta():
    assert glass_delta([3, 5], [0, 2]) == pytest.approx(3 / np.sqrt(2))
    assert glass_delta([0, 2], [3, 5]) == pytest.approx(-glass_delta([3, 5], [0, 2]))
    with pytest.raises(UndefinedEffectSize):
        glass_delta([1, 2], [4, 4, 4])


def test_compare_rows():
    rows = compare([SampleGroup("a", (1, 2, 3)), SampleGroup("b", (4, 5, 6)), SampleGroup("c", (7, 7, 7))])
    assert rows[0]["test"] == "kruskal_wallis"
    assert len(rows) == 4
    assert rows[2]["effect_size"] == "undefined"
