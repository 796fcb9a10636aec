import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synth import catalogue, matrix
from topobias.bias import (
    DegenerateFeatureError,
    Population,
    bias_index,
    hedges_g,
    pooled_std,
    rank_generator_subsets,
)

SUB, ALL = [1, 2, 3], [1, 2, 3, 4, 5]


def test_pooled_std_examples():
    assert pooled_std(SUB, ALL) == pytest.approx(math.sqrt(2), rel=1e-12)
    assert pooled_std([4, 4], [4, 4, 4]) == 0
    assert pooled_std(ALL, ALL) == pytest.approx(np.std(ALL, ddof=1), rel=1e-12)
    with pytest.raises(ValueError):
        pooled_std([1], ALL)


def test_hedges_g_examples():
    assert hedges_g(SUB, ALL) == pytest.approx(1 / math.sqrt(2), rel=1e-12)
    assert hedges_g(ALL, ALL) == 0.0
    assert hedges_g([3, 3], [3, 3, 3]) == 0.0
    # sign follows mean(all) - mean(sub)
    assert hedges_g([4, 5], ALL) < 0
    with pytest.raises(DegenerateFeatureError, match="'width'"):
        hedges_g([1, 1], [2, 2], feature="width")


@given(st.floats(0.01, 100), st.floats(-100, 100))
def test_hedges_g_affine_invariant(c, b):
    sub, all_ = np.array(SUB, float), np.array(ALL, float)
    assert hedges_g(c * sub + b, c * all_ + b) == pytest.approx(hedges_g(sub, all_), rel=1e-9)


def _pop(values, labels=("a",)):
    values = np.asarray(values, float)
    return Population(frozenset(labels), values, catalogue(values.shape[1]))


def test_bias_index_pythagorean(monkeypatch):
    import topobias.bias as bias

    monkeypatch.setattr(bias, "_g_vector", lambda sub, all_, names: np.array([3.0, 4.0]))
    rows = np.zeros((3, 2))
    g, idx = bias_index(_pop(rows), _pop(rows))
    assert g.tolist() == [3.0, 4.0] and idx == 5.0


def test_bias_index_combines_feature_g_values():
    rng = np.random.default_rng(5)
    all_rows = rng.normal(size=(12, 3))
    sub_rows = all_rows[:4]
    g, idx = bias_index(_pop(sub_rows), _pop(all_rows))
    want = [hedges_g(sub_rows[:, k], all_rows[:, k]) for k in range(3)]
    np.testing.assert_allclose(g, want, rtol=1e-12)
    assert idx == pytest.approx(math.sqrt(sum(v * v for v in want)), rel=1e-12)


def test_bias_index_self_is_zero_and_catalogue_checked():
    rows = np.random.default_rng(0).normal(size=(10, 4))
    g, idx = bias_index(_pop(rows), _pop(rows))
    assert idx == 0.0 and not g.any()
    with pytest.raises(ValueError, match="catalogue"):
        bias_index(_pop(rows[:, :3]), _pop(rows))


def test_bias_index_degenerate_names_feature():
    all_ = _pop([[1, 0], [1, 0], [1, 0]])
    sub = Population(frozenset("a"), np.array([[1, 1], [1, 1]], float), all_.catalogue)
    with pytest.raises(DegenerateFeatureError, match="f1"):
        bias_index(sub, Population(frozenset("b"), np.array([[1, 0], [1, 0]], float), all_.catalogue))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.floats(0.1, 50), min_size=3, max_size=3),
       st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_bias_index_affine_and_permutation_invariant(seed, scale, shift):
    rng = np.random.default_rng(seed)
    all_rows = rng.normal(size=(20, 3)) * [1, 5, 0.1]
    sub_rows = all_rows[:8]
    _, base = bias_index(_pop(sub_rows), _pop(all_rows))
    scale, shift = np.array(scale), np.array(shift)
    _, moved = bias_index(_pop(sub_rows * scale + shift), _pop(all_rows * scale + shift))
    assert moved == pytest.approx(base, rel=1e-7, abs=1e-9)
    _, perm = bias_index(_pop(rng.permutation(sub_rows)), _pop(rng.permutation(all_rows)))
    assert perm == pytest.approx(base, rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adding_mean_row_never_widens_gap(seed):
    rng = np.random.default_rng(seed)
    all_rows = rng.normal(size=(15, 4))
    sub_rows = all_rows[:5]
    grown = np.vstack([sub_rows, all_rows.mean(axis=0)])
    before = np.abs(all_rows.mean(0) - sub_rows.mean(0))
    after = np.abs(all_rows.mean(0) - grown.mean(0))
    assert np.all(after <= before + 1e-12)


def _corpus(seed=0, n=30):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n, 3)), rng.normal(0, 1, (n, 3)), rng.normal(4, 1, (n, 3))])
    return matrix(X, ["dup_a"] * n + ["dup_b"] * n + ["odd"] * n)


def test_subset_counts_and_ranks():
    fm = _corpus()
    one = rank_generator_subsets(fm, 1)
    two = rank_generator_subsets(fm, 2)
    assert len(one.entries) == 3 and len(two.entries) == 3
    assert [e.rank for e in one.entries] == [1, 2, 3]
    idx = [e.index for e in two.entries]
    assert idx == sorted(idx) and all(v > 0 for v in idx)
    both = rank_generator_subsets(fm, [1, 2])
    assert len(both.entries) == 6 and both.best(2).labels == two.entries[0].labels
    for bad in (0, 3):
        with pytest.raises(ValueError):
            rank_generator_subsets(fm, bad)


def test_duplicate_generator_pairing_ranks_below_duplicate_pair():
    two = rank_generator_subsets(_corpus(), 2)
    by = {e.labels: e for e in two.entries}
    dup_pair = by[("dup_a", "dup_b")]
    for mixed in (("dup_a", "odd"), ("dup_b", "odd")):
        assert by[mixed].rank < dup_pair.rank


def test_thin_generator_rejected():
    fm = matrix(np.arange(10.0).reshape(5, 2), ["a", "a", "b", "b", "c"])
    with pytest.raises(ValueError, match="c"):
        rank_generator_subsets(fm, 1)


def test_tie_break_by_labels():
    X = np.tile([[0.0], [1.0]], (3, 1))  # every label has the same rows
    fm = matrix(X, ["b", "b", "a", "a", "c", "c"])
    rep = rank_generator_subsets(fm, 1)
    assert [e.labels for e in rep.entries] == [("a",), ("b",), ("c",)]


def test_constant_column_stays_exactly_degenerate_after_shift():
    # a shifted constant column leaves rounding residue in var and mean
    col = np.full(30, 0.0) * 3.7 + 41.123456789
    assert pooled_std(col[:10], col) == 0.0 and hedges_g(col[:10], col) == 0.0
    rows = np.column_stack([col, np.arange(30.0)])
    g, _ = bias_index(_pop(rows[:10]), _pop(rows))
    assert g[0] == 0.0
