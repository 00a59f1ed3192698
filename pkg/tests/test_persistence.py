import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import betti_oracle, oracle_diagrams
from sklearn.base import clone

from phturb.diagmetrics import bottleneck
from phturb.exceptions import InsufficientExpansion
from phturb.filtration import distance_matrix, vr_filtration
from phturb.persistence import (
    PersistenceDiagram,
    VietorisRipsPersistence,
    betti_at,
    boundary_matrix,
    compute_persistence,
    diagrams_to_csv,
    read_diagrams_csv,
    rips_persistence,
)

SQRT2 = math.sqrt(2.0)


def as_list(dgm):
    return sorted(map(tuple, dgm.points.tolist()))


def random_cloud(rng, n=None, grid=False):
    n = int(rng.integers(1, 9)) if n is None else n
    pts = rng.random((n, int(rng.integers(2, 4))))
    if grid:
        # coarse coordinates produce many ties and repeated points
        pts = np.round(pts * 3) / 3
    return pts


def test_single_point():
    f = vr_filtration(np.zeros((1, 1)), 0)
    dg = compute_persistence(f, [0])[0]
    assert as_list(dg) == [(0.0, math.inf)]


def test_two_points():
    dm = np.array([[0, 2.0], [2.0, 0]])
    dg = compute_persistence(vr_filtration(dm, 1), [0])[0]
    assert as_list(dg) == [(0.0, 2.0), (0.0, math.inf)]


def test_square(square):
    f = vr_filtration(distance_matrix(square), 2)
    dg = compute_persistence(f)
    assert as_list(dg[1]) == [(1.0, SQRT2)]
    assert as_list(dg[0]) == [(0.0, 1.0)] * 3 + [(0.0, math.inf)]
    assert betti_at(f, 1.2, 1) == 1
    assert betti_at(f, 1.5, 1) == 0


def test_betti_at_zero_counts_distinct_points():
    pts = np.array([[0, 0], [0, 0], [1, 2], [3, 1], [3, 1.0]])
    f = vr_filtration(distance_matrix(pts), 2)
    assert betti_at(f, 0.0, 0) == 3


def test_insufficient_expansion(square):
    f = vr_filtration(distance_matrix(square), 1)
    with pytest.raises(InsufficientExpansion):
        compute_persistence(f, [1])


def test_boundary_squares_to_zero(rng):
    f = vr_filtration(distance_matrix(rng.random((6, 2))), 3)
    cols = boundary_matrix(f)
    for j, col in enumerate(cols):
        assert all(i < j for i in col)
        acc = set()
        for i in col:
            acc ^= set(cols[i])
        assert not acc


@pytest.mark.parametrize("grid", [False, True])
def test_oracle_equivalence_reduction(grid):
    rng = np.random.default_rng(5 + grid)
    for _ in range(60):
        pts = random_cloud(rng, grid=grid)
        dm = distance_matrix(pts)
        want = oracle_diagrams(dm)
        f = vr_filtration(dm, min(2, len(pts) - 1))
        for h0 in ("reduction", "union-find"):
            got = compute_persistence(f, (0, 1), h0=h0)
            assert as_list(got[0]) == want[0]
            assert as_list(got[1]) == want[1]


@pytest.mark.parametrize("grid", [False, True])
def test_oracle_equivalence_fast_path(grid):
    rng = np.random.default_rng(11 + grid)
    for _ in range(60):
        dm = distance_matrix(random_cloud(rng, grid=grid))
        want = oracle_diagrams(dm)
        got = rips_persistence(dm, metric="precomputed")
        assert as_list(got[0]) == want[0]
        assert as_list(got[1]) == want[1]


def test_fast_path_matches_reduction_on_larger_clouds():
    rng = np.random.default_rng(3)
    for n in (12, 20, 25):
        pts = rng.normal(size=(n, 3))
        dm = distance_matrix(pts)
        a = compute_persistence(vr_filtration(dm, 2))
        b = rips_persistence(dm, metric="precomputed")
        for k in (0, 1):
            assert a[k].same_as(b[k])


def test_betti_matches_oracle_at_critical_values(rng):
    for _ in range(20):
        pts = random_cloud(rng)
        dm = distance_matrix(pts)
        f = vr_filtration(dm, min(2, len(pts) - 1))
        dg = compute_persistence(f)
        for eps in np.unique(f.values):
            for k in (0, 1):
                assert dg[k].betti(eps) == betti_oracle(dm, eps, k)


@given(arrays(float, st.tuples(st.integers(1, 9), st.just(2)),
              elements=st.floats(-5, 5, allow_nan=False, width=16)))
def test_one_essential_h0_and_pair_budget(pts):
    f = vr_filtration(distance_matrix(pts), min(2, len(pts) - 1))
    dg = compute_persistence(f, keep_zero=True)
    assert dg[0].n_essential == 1
    assert dg[1].n_essential == 0
    # every simplex is used at most once across all pairs
    used = 2 * sum(len(d) - d.n_essential for d in dg.values()) + dg[0].n_essential
    assert used <= len(f)
    assert len(dg[0]) == len(pts)


def test_keep_zero_flag():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    dropped = rips_persistence(pts)[0]
    kept = rips_persistence(pts, keep_zero=True)[0]
    assert dropped.n_zero_persistence == 1 and kept.n_zero_persistence == 1
    assert len(kept) == len(dropped) + 1
    assert (0.0, 0.0) in as_list(kept)


def test_max_scale_leaves_components_and_loops_open(square):
    dg = rips_persistence(square, max_scale=1.2)
    assert dg[0].n_essential == 1
    assert as_list(dg[1]) == [(1.0, math.inf)]
    dg = rips_persistence(square, max_scale=0.5)
    assert dg[0].n_essential == 4


def test_stability_under_noise(rng):
    for eps in (0.01, 0.05):
        for _ in range(20):
            pts = rng.random((12, 2))
            noise = rng.normal(size=pts.shape)
            noise *= (eps * rng.random((12, 1)) ** 0.5) / np.linalg.norm(noise, axis=1, keepdims=True)
            a, b = rips_persistence(pts), rips_persistence(pts + noise)
            for k in (0, 1):
                assert bottleneck(a[k], b[k]) <= 2 * eps + 1e-9


def test_diagram_csv_roundtrip(square):
    dg = rips_persistence(square)
    text = diagrams_to_csv(dg)
    assert text.splitlines() == [
        "dim,birth,death,multiplicity",
        "0,0.0,1.0,3",
        "0,0.0,inf,1",
        f"1,1.0,{SQRT2!r},1",
    ]
    back = read_diagrams_csv(text)
    assert all(back[k].same_as(dg[k]) for k in (0, 1))


def test_diagram_validation():
    with pytest.raises(ValueError):
        PersistenceDiagram(1, [[2.0, 1.0]], [1])
    with pytest.raises(ValueError):
        PersistenceDiagram(1, [[0.0, 1.0]], [0])
    d = PersistenceDiagram.from_points(1, [[0, 1], [0, 1], [2, 3]])
    assert d.multiplicity.tolist() == [2, 1] and len(d) == 3
    assert d.scaled(2.0).pairs.tolist() == [[0, 2], [4, 6]]


def test_transformer(square):
    est = VietorisRipsPersistence(homology_dimensions=(1,))
    assert clone(est).get_params()["homology_dimensions"] == (1,)
    out = est.fit_transform([square, square * 2])
    assert as_list(out[1][1]) == [(2.0, 2 * SQRT2)]
    with pytest.raises(ValueError):
        VietorisRipsPersistence(homology_dimensions=(2,)).fit([square])
