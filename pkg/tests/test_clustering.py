import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coalsim.clustering import (detect_clusters, inv_normal_cdf, is_collidable, is_separated, make_cell,
                                root_square)
from coalsim.errors import DomainError
from coalsim.model import SystemParams
from oracles import Z_001, Z_0975, literal_quadtree, normal_cdf


def test_inv_normal_cdf_examples():
    assert inv_normal_cdf(0.5) == 0.0
    assert inv_normal_cdf(0.975) == pytest.approx(Z_0975, abs=1.2e-9)
    assert inv_normal_cdf(0.01) == pytest.approx(Z_001, abs=1.2e-9)
    for p in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(DomainError):
            inv_normal_cdf(p)


def test_inv_normal_cdf_round_trip():
    rng = np.random.default_rng(0)
    for p in rng.uniform(1e-6, 1 - 1e-6, 1000):
        assert normal_cdf(inv_normal_cdf(p)) == pytest.approx(p, abs=1e-8)


PARAMS = SystemParams(1.0, 1.0)


def test_separated_examples():
    cell = make_cell([[0.3, 0.3]] * 3, [1, 2, 3], [0, 1, 2], PARAMS, 0, 0, 1)
    assert cell.Y == 0 and is_separated(cell, 1e-9)
    corners = make_cell([[0, 0], [1, 1]], [1, 1], [0, 1], PARAMS, 0, 0, 1)
    assert corners.Y / corners.s2 == pytest.approx(0.25)
    assert not is_separated(corners, 0.1)


def test_collidable_examples():
    heavy = SystemParams(100.0, 1.0)
    cell = make_cell([[0.5, 0.5]] * 2, [1, 1], [0, 1], heavy, 0, 0, 1)
    assert cell.nu < 0 and cell.alpha < 0
    assert is_collidable(cell, 1e-3, 0.01)
    light = make_cell([[0.5, 0.5]] * 4, [1, 1, 1, 1], [0, 1, 2, 3], SystemParams(1e-3, 1.0), 0, 0, 1)
    assert light.nu >= 0 and not is_collidable(light, 1e-3, 0.01)
    wide = make_cell([[0, 0], [1, 0]], [1, 1], [0, 1], SystemParams(1.0, 1.0), 0, 0, 1)
    assert wide.nu < 0 < wide.alpha
    assert not is_collidable(wide, 1e-6, 0.01)


def clump(centre, n, spread, rng):
    return np.asarray(centre) + rng.normal(0, spread, (n, 2))


def test_two_tight_heavy_clumps():
    rng = np.random.default_rng(1)
    x = np.vstack([clump([-3, 0], 6, 1e-4, rng), clump([3, 1], 6, 1e-4, rng)])
    m = np.ones(12)
    params = SystemParams(20.0, 0.5)
    assert make_cell(x, m, range(6), params, 0, 0, 1).nu < -1
    cells = detect_clusters(x, m, 1e-3, params)
    assert [sorted(c.members.tolist()) for c in cells] == [list(range(6)), list(range(6, 12))]
    ref = literal_quadtree(x, m, 1e-3, params.chi, params.mu_tilde, params.gamma, 0.1, Z_001)
    assert sorted(frozenset(c.members.tolist()) for c in cells) == sorted(ref, key=min)


def test_uniform_subcritical_gives_nothing():
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, (200, 2))
    params = SystemParams(1e-6, 10.0)
    assert detect_clusters(x, np.full(200, 1e-3), 1e-3, params) == []


def test_coincident_clump_root_kept_and_permutation_invariant():
    x = np.zeros((8, 2)) + [1.0, 2.0]
    m = np.arange(1, 9, dtype=float)
    params = SystemParams(10.0, 0.1)
    cells = detect_clusters(x, m, 1e-3, params)
    assert len(cells) == 1 and len(cells[0]) == 8 and cells[0].depth == 0
    perm = np.random.default_rng(3).permutation(8)
    again = detect_clusters(x[perm], m[perm], 1e-3, params, ids=np.arange(8)[perm])
    np.testing.assert_array_equal(again[0].ids, cells[0].ids)


def random_system(seed, n=60):
    rng = np.random.default_rng(seed)
    k = rng.integers(1, 5)
    centres = rng.uniform(-5, 5, (k, 2))
    x = np.vstack([clump(c, n // k, 10 ** rng.uniform(-4, -1), rng) for c in centres])
    x = np.vstack([x, rng.uniform(-5, 5, (n - len(x), 2))])
    m = rng.uniform(0.5, 2.0, len(x))
    params = SystemParams(10 ** rng.uniform(-1, 1.5), 10 ** rng.uniform(-1, 0.5))
    return x, m, params


@pytest.mark.parametrize("seed", range(40))
def test_matches_literal_walk(seed):
    x, m, params = random_system(seed)
    dt = 1e-3
    cells = detect_clusters(x, m, dt, params)
    ref = literal_quadtree(x, m, dt, params.chi, params.mu_tilde, params.gamma, 0.1, Z_001)
    assert sorted((frozenset(c.members.tolist()) for c in cells), key=min) == ref


@pytest.mark.parametrize("seed", range(20))
def test_postconditions_and_disjointness(seed):
    x, m, params = random_system(100 + seed)
    dt = 1e-3
    cells = detect_clusters(x, m, dt, params)
    seen = set()
    for c in cells:
        members = set(c.members.tolist())
        assert len(members) >= 2 and not (members & seen)
        seen |= members
        check = make_cell(x, m, c.members, params, c.x0, c.y0, c.width, c.depth)
        assert check.Y == pytest.approx(c.Y, rel=1e-9, abs=1e-300)
        assert is_separated(check) and is_collidable(check, dt, 0.01)
        x0, y0, x1, y1 = c.bbox
        assert np.all((x[c.members, 0] >= x0) & (x[c.members, 0] <= x1))
        assert np.all((x[c.members, 1] >= y0) & (x[c.members, 1] <= y1))
        assert c.depth <= 40


@given(st.integers(0, 10_000))
def test_permutation_invariance(seed):
    x, m, params = random_system(seed, n=30)
    perm = np.random.default_rng(seed).permutation(len(m))
    ids = np.arange(len(m))
    a = detect_clusters(x, m, 1e-3, params, ids=ids)
    b = detect_clusters(x[perm], m[perm], 1e-3, params, ids=ids[perm])
    assert sorted(tuple(c.ids) for c in a) == sorted(tuple(c.ids) for c in b)
    for ca, cb in zip(sorted(a, key=lambda c: c.ids[0]), sorted(b, key=lambda c: c.ids[0])):
        assert ca.Y == cb.Y and ca.nu == cb.nu


def test_depth_limit_terminates():
    # two coincident points plus one far away never separate; the walk must stop at max_depth
    x = np.array([[0.0, 0.0], [0.0, 0.0], [1e-300, 0.0], [1.0, 1.0]])
    cells = detect_clusters(x, np.ones(4), 1e-3, SystemParams(1e-6, 1.0), max_depth=5)
    assert cells == []


def test_detect_rejects_bad_input():
    with pytest.raises(DomainError):
        detect_clusters([[0, 0]], [1], 1e-3, PARAMS)
    with pytest.raises(DomainError):
        detect_clusters([[0, 0], [1, 1]], [1, 1], 0.0, PARAMS)
    with pytest.raises(DomainError):
        detect_clusters([[0, 0], [1, 1]], [1, 1], 1e-3, PARAMS, p=1.5)


def test_root_square_covers_points():
    x = np.array([[-1.0, 2.0], [3.0, 2.5]])
    x0, y0, w = root_square(x)
    assert w == pytest.approx(4.04)
    assert x0 < -1 and x0 + w > 3 and y0 < 2 and y0 + w > 2.5
    assert root_square([[1.0, 1.0]])[2] > 0
    assert math.isfinite(root_square([[1e300, 0.0]])[2])
