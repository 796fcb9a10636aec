import numpy as np
from hypothesis import given, settings, strategies as st

from topobias.spatial import GridIndex


def brute_pairs(xy, r):
    out = []
    for i in range(len(xy)):
        for j in range(i + 1, len(xy)):
            d = float(np.hypot(*(xy[i] - xy[j])))
            if d < r:
                out.append((i, j))
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 60), st.floats(0.5, 300))
def test_pairs_match_brute_force(seed, n, r):
    xy = np.random.default_rng(seed).uniform(0, 1000, size=(n, 2))
    i, j, d = GridIndex(xy, r).pairs_within(r)
    assert list(zip(i.tolist(), j.tolist())) == brute_pairs(xy, r)
    np.testing.assert_allclose(d, [np.hypot(*(xy[a] - xy[b])) for a, b in zip(i, j)])


def test_coincident_and_boundary_points():
    xy = np.array([[0, 0], [0, 0], [1000, 1000], [999.5, 1000], [500, 500]])
    i, j, d = GridIndex(xy, 1.0).pairs_within(1.0)
    assert list(zip(i.tolist(), j.tolist())) == [(0, 1), (2, 3)]
    assert d[0] == 0.0


def test_smaller_radius_than_cell():
    xy = np.random.default_rng(3).uniform(0, 100, size=(40, 2))
    i, j, _ = GridIndex(xy, 20).pairs_within(7)
    assert list(zip(i.tolist(), j.tolist())) == brute_pairs(xy, 7)
