import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmomp import (FeasibleParams, Pattern, PointSpace, StopCriteria, babel_values,
                   gaussian_conv_dictionary, gm_omp, greedy_choice, identity_dictionary,
                   is_feasible, omp, omp_per_column, omp_vectorized, restricted_least_squares,
                   somp, weakness)
from gmomp.dictionary import Dictionary
from gmomp.experiments import make_slope_matrix
from gmomp.spaces import INF

from oracles import brute_force_max_entry, oracle_feasible


def _orthonormal(n, seed=0):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    return Dictionary(q, PointSpace.line(n))


def _paper_pair():
    # 2 atoms x 1000 measurements: row 0 decreasing, row 1 increasing
    return np.vstack([np.arange(1000, 0, -1), np.arange(1, 1001)]).astype(float)


# -- StopCriteria ----------------------------------------------------------------

def test_stop_criteria_validation():
    with pytest.raises(ValueError):
        StopCriteria(max_iterations=0)
    with pytest.raises(ValueError):
        StopCriteria()
    with pytest.raises(ValueError):
        StopCriteria(max_iterations=2, beta=1.5)
    assert StopCriteria(residual_tol=1e-3).max_iterations is None


# -- omp -----------------------------------------------------------------------------

def test_omp_exact_atom():
    D = gaussian_conv_dictionary(30, 1.2)
    x, support = omp(D, D.atoms[:, 7], StopCriteria(max_iterations=1))
    assert support == [7]
    assert x[7] == pytest.approx(1.0, abs=1e-14)
    assert np.linalg.norm(D.atoms @ x - D.atoms[:, 7]) <= 1e-14


def test_omp_orthonormal_picks_largest_correlations():
    D = _orthonormal(20)
    s = np.random.default_rng(1).standard_normal(20)
    _, support = omp(D, s, StopCriteria(max_iterations=5))
    top = np.argsort(-np.abs(D.atoms.T @ s))[:5]
    assert sorted(support) == sorted(top.tolist())


def test_omp_recovers_sparse_vector_under_babel_condition():
    rng = np.random.default_rng(5)
    L = 2
    for _ in range(50):
        D = Dictionary(rng.standard_normal((400, 70)), PointSpace.line(70))
        mu = babel_values(D, L)
        if mu[L] < 1 - mu[L - 1]:
            break
    else:
        pytest.fail("no dictionary satisfying the Babel condition was drawn")
    for _ in range(20):
        x = np.zeros(70)
        idx = rng.choice(70, size=L, replace=False)
        x[idx] = rng.uniform(1, 2, size=L) * rng.choice([-1, 1], size=L)
        xh, support = omp(D, D.atoms @ x, StopCriteria(max_iterations=L))
        assert sorted(support) == sorted(idx.tolist())
        assert np.allclose(xh, x, atol=1e-12)


def test_omp_shape_check():
    with pytest.raises(ValueError):
        omp(identity_dictionary(3), np.ones(4), StopCriteria(max_iterations=1))


# -- greedy_choice --------------------------------------------------------------------

def test_greedy_two_row_example():
    C = _paper_pair()
    pat = greedy_choice(C, PointSpace.line(1000), PointSpace.line(2), FeasibleParams(INF, 0.0))
    assert pat == Pattern((0, k) for k in range(1000))
    ratios = [C[j, k] / C[:, k].max() for j, k in pat]
    assert min(ratios) == pytest.approx(1 / 1000)


def test_greedy_sigma_zero_is_global_argmax():
    C = np.abs(np.random.default_rng(2).standard_normal((6, 9)))
    pat = greedy_choice(C, PointSpace.line(9), PointSpace.line(6), FeasibleParams(0.0, 1.0))
    j, k = np.unravel_index(np.argmax(C), C.shape)
    assert pat == Pattern([(int(j), int(k))])


def test_greedy_diagonal_example_is_optimal_and_maximal():
    C = np.diag([5.0, 4.0, 3.0])
    line = PointSpace.line(3)
    params = FeasibleParams(1.0, 1.0)
    pat = greedy_choice(C, line, line, params)
    assert pat == Pattern([(0, 0), (1, 1), (2, 2)])
    coords = np.arange(1.0, 4.0)
    assert max(C[j, k] for j, k in pat) == brute_force_max_entry(C, coords, coords, 1.0, 1.0)
    # no entry of supp(C) can be added while staying feasible
    for j, k in zip(*np.nonzero(C)):
        if (j, k) not in pat:
            assert not oracle_feasible(list(pat) + [(j, k)], coords, coords, 1.0, 1.0)


def test_greedy_ties_go_to_lowest_pair():
    C = np.ones((3, 3))
    pat = greedy_choice(C, PointSpace.line(3), PointSpace.line(3), FeasibleParams(0.0, 0.0))
    assert pat == Pattern([(0, 0)])


def test_greedy_shape_check():
    with pytest.raises(ValueError):
        greedy_choice(np.ones((2, 3)), PointSpace.line(2), PointSpace.line(2), FeasibleParams(1, 1))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 1.0, 2.0, INF]),
       st.sampled_from([0.0, 0.5, 1.0, INF]))
def test_greedy_output_is_feasible_and_maximal(seed, sigma, tau):
    rng = np.random.default_rng(seed)
    P, M = int(rng.integers(1, 6)), int(rng.integers(1, 7))
    C = np.abs(rng.standard_normal((P, M))) * (rng.random((P, M)) < 0.7)
    if not C.any():
        C[0, 0] = 1.0
    mcoord = np.sort(rng.choice(np.arange(1, 12), size=M, replace=False)).astype(float)
    pcoord = np.arange(1.0, P + 1)
    pat = greedy_choice(C, PointSpace(mcoord), PointSpace(pcoord), FeasibleParams(sigma, tau))
    assert oracle_feasible(pat, mcoord, pcoord, sigma, tau)
    assert all(C[j, k] > 0 for j, k in pat)
    assert max(C[j, k] for j, k in pat) == C.max()
    for j, k in zip(*np.nonzero(C)):
        if (j, k) not in pat:
            assert not oracle_feasible(list(pat) + [(j, k)], mcoord, pcoord, sigma, tau)


# -- restricted least squares ------------------------------------------------------

def test_restricted_ls_empty_support():
    D = gaussian_conv_dictionary(10, 1.0)
    S = np.random.default_rng(0).standard_normal((10, 4))
    X, R = restricted_least_squares(D, S, [])
    assert not X.any() and np.array_equal(R, S)


def test_restricted_ls_orthonormal_projection():
    D = _orthonormal(8)
    S = np.random.default_rng(3).standard_normal((8, 5))
    support = [(0, 0), (3, 0), (2, 4), (7, 1)]
    X, _ = restricted_least_squares(D, S, support)
    C = D.atoms.T @ S
    for j, k in support:
        assert X[j, k] == pytest.approx(C[j, k], abs=1e-14)
    assert np.count_nonzero(X) == len(support)


def test_restricted_ls_single_atom_inner_product():
    D = gaussian_conv_dictionary(12, 1.5)
    s = np.random.default_rng(4).standard_normal((12, 1))
    X, _ = restricted_least_squares(D, s, [(5, 0)])
    assert X[5, 0] == pytest.approx(float(D.atoms[:, 5] @ s[:, 0]), abs=1e-14)


def test_restricted_ls_rank_deficient_support():
    atoms = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    D = Dictionary(atoms, PointSpace.line(3))
    s = np.array([[2.0], [1.0]])
    X, R = restricted_least_squares(D, s, [(0, 0), (1, 0)])
    assert np.allclose(D.atoms @ X + R, s)
    assert np.linalg.norm(R) == pytest.approx(1.0)


def test_restricted_ls_index_check():
    with pytest.raises(IndexError):
        restricted_least_squares(identity_dictionary(3), np.ones((3, 2)), [(0, 2)])


# -- gm_omp -----------------------------------------------------------------------------

def test_gm_omp_slope_matrix_exact():
    N = 64
    D = gaussian_conv_dictionary(N, math.sqrt(2.5))
    for xi in (0, 15, 30, 45):
        X = make_slope_matrix(N, xi)
        sol = gm_omp(D, D.atoms @ X, PointSpace.line(N), FeasibleParams(1, 1),
                     StopCriteria(max_iterations=1))
        assert sol.nnz == N
        assert np.linalg.norm(sol.X - X) <= 1e-8
        assert sol.weakness() == 1.0


def test_gm_omp_single_feasible_pattern_in_one_iteration():
    D = _orthonormal(16, seed=9)
    X = np.zeros((16, 16))
    for k in range(3, 12):
        X[5 + (k % 2), k] = 1.0 + 0.1 * k
    sol = gm_omp(D, D.atoms @ X, PointSpace.line(16), FeasibleParams(1, 1),
                 StopCriteria(max_iterations=5, residual_tol=1e-10))
    assert sol.iterations == 1
    assert sol.residual_norms[-1] <= 1e-12
    assert sol.support == Pattern(zip(*np.nonzero(X)))


def test_gm_omp_two_row_weakness():
    D = identity_dictionary(2)
    sol = gm_omp(D, _paper_pair(), PointSpace.line(1000), FeasibleParams(INF, 0.0),
                 StopCriteria(max_iterations=1))
    assert weakness(sol) == pytest.approx(1 / 1000)


def test_weakness_is_one_for_column_maximum_selections():
    rng = np.random.default_rng(8)
    D = Dictionary(rng.standard_normal((10, 14)), PointSpace.line(14))
    S = rng.standard_normal((10, 6))
    assert omp_per_column(D, S, StopCriteria(max_iterations=3)).weakness() == 1.0
    sol = gm_omp(D, S, PointSpace.line(6), FeasibleParams(0.0, 1.0), StopCriteria(max_iterations=8))
    assert sol.weakness() == 1.0
    with pytest.raises(ValueError):
        weakness(gm_omp(D, np.zeros((10, 6)), PointSpace.line(6), FeasibleParams(1, 1),
                        StopCriteria(max_iterations=1)))


def test_gm_omp_stops_at_residual_tolerance():
    D = _orthonormal(12, seed=2)
    X = np.zeros((12, 12))
    X[2, 0], X[9, 11] = 3.0, 1.0
    sol = gm_omp(D, D.atoms @ X, PointSpace.line(12), FeasibleParams(1, 1),
                 StopCriteria(max_iterations=10, residual_tol=1e-9))
    assert sol.iterations == 2 and not sol.stagnated


def test_gm_omp_flags_stagnation():
    rng = np.random.default_rng(6)
    D = Dictionary(rng.standard_normal((8, 10)), PointSpace.line(10))
    S = rng.standard_normal((8, 4))
    # beta = 1 excludes every entry, so nothing can ever be selected
    sol = gm_omp(D, S, PointSpace.line(4), FeasibleParams(1, 1),
                 StopCriteria(max_iterations=3, beta=1.0))
    assert sol.stagnated and sol.iterations == 0


def test_gm_omp_exhausted_correlations_are_not_stagnation():
    D = _orthonormal(6, seed=1)
    S = D.atoms[:, [1, 1, 2]]
    sol = gm_omp(D, S, PointSpace.line(3), FeasibleParams(INF, INF),
                 StopCriteria(max_iterations=4))
    assert sol.iterations == 1 and not sol.stagnated


def test_gm_omp_dimension_check():
    with pytest.raises(ValueError):
        gm_omp(identity_dictionary(3), np.ones((3, 2)), PointSpace.line(3), FeasibleParams(1, 1),
               StopCriteria(max_iterations=1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 1.0, 3.0, INF]),
       st.sampled_from([0.0, 1.0, INF]))
def test_gm_omp_residual_is_monotone_and_patterns_feasible(seed, sigma, tau):
    rng = np.random.default_rng(seed)
    T, P, M = int(rng.integers(4, 10)), int(rng.integers(4, 12)), int(rng.integers(2, 8))
    D = Dictionary(rng.standard_normal((T, P)), PointSpace.line(P))
    S = rng.standard_normal((T, M))
    mspace = PointSpace.line(M)
    params = FeasibleParams(sigma, tau)
    sol = gm_omp(D, S, mspace, params, StopCriteria(max_iterations=5))
    norms = [np.linalg.norm(S)] + sol.residual_norms
    assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(norms, norms[1:]))
    for pat in sol.patterns:
        assert is_feasible(pat, mspace, D.pspace, params)
    assert np.allclose(S - D.atoms @ sol.X, S - D.atoms @ restricted_least_squares(D, S, sol.support)[0])
    assert all(0 < w <= 1 for w in sol.weakness_trace)


def _separated_patterns(rng, n):
    """Constant-row segments on disjoint measurement ranges with rows at least 3 apart."""
    cuts = np.sort(rng.choice(np.arange(2, n - 1), size=2, replace=False))
    ranges = [(0, cuts[0] - 1), (cuts[0] + 1, cuts[1] - 1), (cuts[1] + 1, n - 1)]
    rows = rng.choice(np.arange(0, n, 3), size=3, replace=False)
    return [Pattern((int(r), k) for k in range(a, b + 1)) for r, (a, b) in zip(rows, ranges) if b >= a]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_planted_patterns_recovered_with_beta_filter(seed):
    rng = np.random.default_rng(seed)
    n = 24
    D = _orthonormal(n, seed=seed)
    pats = _separated_patterns(rng, n)
    X = np.zeros((n, n))
    for tier, pat in enumerate(pats):
        for j, k in pat:
            X[j, k] = (4.0 ** (len(pats) - tier)) * rng.uniform(1, 1.5)
    # an orthonormal dictionary has beta = 0, the most permissive filter
    sol = gm_omp(D, D.atoms @ X, PointSpace.line(n), FeasibleParams(1, 1),
                 StopCriteria(max_iterations=len(pats), beta=0.0))
    assert set(sol.patterns) == set(pats)
    assert np.allclose(sol.X, X, atol=1e-12)


# -- baselines --------------------------------------------------------------------------

def test_somp_common_atom_first():
    rng = np.random.default_rng(3)
    D = Dictionary(rng.standard_normal((20, 30)), PointSpace.line(30))
    X = np.zeros((30, 6))
    X[17] = 2.0
    X[rng.integers(0, 30, 6), np.arange(6)] += 0.3
    sol = somp(D, D.atoms @ X, 1.0, StopCriteria(max_iterations=1))
    assert sol.patterns[0] == Pattern((17, k) for k in range(6))


def test_somp_slope_support_overestimates():
    N = 48
    D = gaussian_conv_dictionary(N, math.sqrt(2.5))
    X = make_slope_matrix(N, 20)
    S = D.atoms @ X
    sol = somp(D, S, 1.0, StopCriteria(max_iterations=N, residual_tol=1e-9 * np.linalg.norm(S)))
    # every selected row is filled across all N measurements
    est_rows = np.unique(np.nonzero(sol.X)[0]).size
    assert sol.nnz == est_rows * N
    assert est_rows >= np.unique(np.nonzero(X)[0]).size
    assert sol.nnz >= 10 * N


def test_somp_infinity_norm_tie_goes_to_lower_row():
    sol = somp(identity_dictionary(2), _paper_pair(), math.inf, StopCriteria(max_iterations=1))
    assert sol.patterns[0] == Pattern((0, k) for k in range(1000))


def test_somp_rejects_bad_norm():
    with pytest.raises(ValueError):
        somp(identity_dictionary(2), np.ones((2, 2)), 0.5, StopCriteria(max_iterations=1))


def test_vectorized_adds_one_pair_per_iteration():
    rng = np.random.default_rng(4)
    D = Dictionary(rng.standard_normal((8, 12)), PointSpace.line(12))
    sol = omp_vectorized(D, rng.standard_normal((8, 5)), StopCriteria(max_iterations=7))
    assert [len(p) for p in sol.patterns] == [1] * 7


@pytest.mark.parametrize("seed", range(10))
def test_special_case_equivalences(seed):
    rng = np.random.default_rng(seed)
    D = Dictionary(rng.standard_normal((10, 16)), PointSpace.line(16))
    S = rng.standard_normal((10, 7))
    mspace = PointSpace.line(7)
    stop = StopCriteria(max_iterations=4)
    assert np.array_equal(gm_omp(D, S, mspace, FeasibleParams(INF, INF), stop).X,
                          omp_per_column(D, S, stop).X)
    assert np.array_equal(gm_omp(D, S, mspace, FeasibleParams(INF, 0.0), stop).X,
                          somp(D, S, math.inf, stop).X)
    stop = StopCriteria(max_iterations=20)
    assert np.array_equal(gm_omp(D, S, mspace, FeasibleParams(0.0, INF), stop).X,
                          omp_vectorized(D, S, stop).X)


def test_per_column_matches_single_vector_omp():
    rng = np.random.default_rng(12)
    D = Dictionary(rng.standard_normal((9, 13)), PointSpace.line(13))
    S = rng.standard_normal((9, 4))
    sol = omp_per_column(D, S, StopCriteria(max_iterations=3))
    for k in range(4):
        x, _ = omp(D, S[:, k], StopCriteria(max_iterations=3))
        assert np.array_equal(sol.X[:, k], x)


def test_brute_force_oracle_on_hand_solved_case():
    C = np.array([[1.0, 0.0], [0.0, 2.0]])
    coords = np.array([1.0, 2.0])
    assert brute_force_max_entry(C, coords, coords, 1.0, 1.0) == 2.0
