import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from domino_denoise.tiling import (
    CostMatrix,
    InfeasibleError,
    Parity,
    assignment_cost,
    build_cost_matrix,
    domino_tiling,
    enumerate_tilings,
    solve_lap,
    tiling_cost,
    verify_tiling,
)


def test_dense_examples():
    a = solve_lap(CostMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]])))
    assert a.tolist() == [0, 1]
    cm = CostMatrix.from_dense(np.array([[1.0, 2.0], [3.0, 1.0]]))
    a = solve_lap(cm)
    assert a.tolist() == [0, 1]
    assert assignment_cost(cm, a) == 2.0


def test_infeasible_raises():
    dense = np.array([[1.0, np.inf], [2.0, np.inf]])
    with pytest.raises(InfeasibleError):
        solve_lap(CostMatrix.from_dense(dense))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 9), st.floats(0.2, 1.0), st.integers(0, 2**32 - 1))
def test_matches_scipy_on_random_sparse(n, density, seed):
    r = np.random.default_rng(seed)
    dense = np.round(r.random((n, n)) * 10, 1)  # rounding provokes ties
    dense[r.random((n, n)) > density] = np.inf
    cm = CostMatrix.from_dense(dense)
    finite = np.where(np.isinf(dense), 1e9, dense)
    rows, cols = linear_sum_assignment(finite)
    feasible = np.all(np.isfinite(dense[rows, cols]))
    if not feasible:
        with pytest.raises(InfeasibleError):
            solve_lap(cm)
        return
    a = solve_lap(cm)
    assert sorted(a.tolist()) == list(range(n))
    assert np.all(np.isfinite(dense[np.arange(n), a]))
    assert assignment_cost(cm, a) == pytest.approx(dense[rows, cols].sum(), abs=1e-9)


def test_deterministic(rng):
    x = rng.random((10, 10))
    cm = build_cost_matrix(x, Parity.EVEN)
    assert np.array_equal(solve_lap(cm), solve_lap(cm))


@pytest.mark.parametrize("shape", [(2, 2), (2, 4), (3, 4), (4, 4), (2, 6), (4, 3)])
def test_grid_optimum_equals_brute_force(rng, shape):
    tilings = enumerate_tilings(*shape)
    for _ in range(10):
        x = rng.random(shape)
        best = min(tiling_cost(x, t) for t in tilings)
        for parity in Parity:
            t = domino_tiling(x, parity)
            assert verify_tiling(t)
            assert tiling_cost(x, t) == pytest.approx(best, abs=1e-9)


def test_grid_64_matches_scipy_sparse_matching(rng):
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import min_weight_full_bipartite_matching

    x = rng.random((64, 64))
    cm = build_cost_matrix(x, Parity.ODD)
    # shift by 1 so no explicit zero cost is dropped by the sparse format
    g = csr_matrix((cm.costs + 1.0, cm.indices, cm.indptr), shape=(cm.n_agents, cm.n_tasks))
    _, cols = min_weight_full_bipartite_matching(g)
    ref = sum(cm.entry(a, c) for a, c in enumerate(cols))
    assert assignment_cost(cm, solve_lap(cm)) == pytest.approx(ref, abs=1e-9)
