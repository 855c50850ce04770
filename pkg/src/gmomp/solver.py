"""Greedy pursuit solvers for the multiple-measurement problem S = D X.

``gm_omp`` grows the support of X by one structured pattern per iteration,
chosen by :func:`greedy_choice` from the feasible set F(sigma, tau). The
baselines (per-column OMP, vectorized OMP, S-OMP) are its special cases and
share the column least-squares kernel, so the equivalences hold exactly.

Ties in every argmax go to the lowest (atom, measurement) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dtrtrs

from .dictionary import Dictionary
from .spaces import FeasibleParams, Pattern, PointSpace, scaled, within

DEFAULT_RELATIVE_FLOOR = 1e-10


@dataclass(frozen=True)
class StopCriteria:
    """Stopping rules.

    max_iterations
        L, the iteration cap (``None`` for no cap).
    residual_tol
        Stop once the Frobenius norm of the residual is <= this value.
    correlation_floor
        Absolute threshold below which correlations are never selected.
        ``None`` means 1e-10 times the largest initial correlation.
    beta
        Optional adaptive threshold in [0, 1]: only entries whose correlation
        exceeds ``beta`` times their column maximum are selected.
    """

    max_iterations: int | None = None
    residual_tol: float = 0.0
    correlation_floor: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if self.residual_tol < 0:
            raise ValueError("residual_tol must be non-negative")
        if self.max_iterations is None and not self.residual_tol > 0:
            raise ValueError("need a finite max_iterations or a positive residual_tol")
        if self.correlation_floor is not None and self.correlation_floor < 0:
            raise ValueError("correlation_floor must be non-negative")
        if self.beta is not None and not 0 <= self.beta <= 1:
            raise ValueError("beta must lie in [0, 1]")

    def iterations(self):
        return range(self.max_iterations) if self.max_iterations is not None else _count()

    def floor(self, C):
        if self.correlation_floor is not None:
            return self.correlation_floor
        return DEFAULT_RELATIVE_FLOOR * (float(C.max()) if C.size else 0.0)


def _count():
    i = 0
    while True:
        yield i
        i += 1


@dataclass
class Solution:
    """Result of a pursuit run.

    ``patterns[l]`` holds the pairs added in iteration l, ``residual_norms[l]``
    the Frobenius norm of the residual after it, and ``weakness_trace`` the
    ratio of each selected correlation to its column maximum.
    """

    X: np.ndarray
    patterns: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    weakness_trace: list = field(default_factory=list)
    stagnated: bool = False
    method: str = "gm-omp"

    @property
    def support(self):
        return Pattern(p for pat in self.patterns for p in pat)

    @property
    def nnz(self):
        return int(np.count_nonzero(self.X))

    @property
    def iterations(self):
        return len(self.patterns)

    def weakness(self):
        return weakness(self)


def weakness(solution: Solution) -> float:
    """Smallest selected-to-column-maximum correlation ratio of the run."""
    if not solution.weakness_trace:
        raise ValueError("solution has an empty weakness trace")
    return float(min(solution.weakness_trace))


# -- least squares kernel ----------------------------------------------------

def _factor(A):
    q, r = np.linalg.qr(A)
    d = np.abs(np.diag(r))
    rank_ok = d.size == 0 or d.min() > max(A.shape) * np.finfo(float).eps * d.max()
    return (q, r) if rank_ok else None


def _solve_with(A, fac, s):
    if fac is None:
        y = np.linalg.lstsq(A, s, rcond=None)[0]
    else:
        q, r = fac
        y, info = dtrtrs(r, q.T @ s)
        if info != 0:
            y = np.linalg.lstsq(A, s, rcond=None)[0]
    return y, s - A @ y


def _solve_columns(Dm, St, X, Rt, atoms_per_col, cols):
    """Re-solve the listed columns in place; columns with the same atom set share one QR."""
    groups = {}
    for k in cols:
        groups.setdefault(tuple(sorted(atoms_per_col[k])), []).append(k)
    for atoms, ks in groups.items():
        if not atoms:
            for k in ks:
                X[:, k] = 0.0
                Rt[k] = St[k]
            continue
        idx = list(atoms)
        A = Dm[:, idx]
        fac = _factor(A)
        for k in ks:
            y, r = _solve_with(A, fac, St[k])
            X[:, k] = 0.0
            X[idx, k] = y
            Rt[k] = r


def restricted_least_squares(D: Dictionary, S, support):
    """Least squares of S on D with X constrained to ``support``.

    Decouples per measurement column: column k is fitted with the atoms
    paired with k in ``support``. Returns ``(X, R)`` with R = S - D X.
    """
    Dm = D.atoms
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != Dm.shape[0]:
        raise ValueError(f"data shape {S.shape} does not match dictionary shape {Dm.shape}")
    P, M = Dm.shape[1], S.shape[1]
    atoms_per_col = [set() for _ in range(M)]
    for j, k in support:
        if not (0 <= j < P and 0 <= k < M):
            raise IndexError(f"support pair {(j, k)} out of range for {P} atoms x {M} measurements")
        atoms_per_col[k].add(j)
    St = np.ascontiguousarray(S.T)
    X = np.zeros((P, M))
    Rt = St.copy()
    _solve_columns(Dm, St, X, Rt, atoms_per_col, range(M))
    return X, Rt.T.copy()


def _correlate(Dm, r):
    return np.abs(Dm.T @ r)


class _Residual:
    """Residual, correlations and support of a running MMV pursuit."""

    def __init__(self, D, S):
        self.Dm = D.atoms
        S = np.asarray(S, dtype=float)
        if S.ndim != 2 or S.shape[0] != self.Dm.shape[0]:
            raise ValueError(f"data shape {S.shape} does not match dictionary shape {self.Dm.shape}")
        self.P, self.M = self.Dm.shape[1], S.shape[1]
        self.St = np.ascontiguousarray(S.T)
        self.Rt = self.St.copy()
        self.X = np.zeros((self.P, self.M))
        self.C = np.empty((self.P, self.M))
        for k in range(self.M):
            self.C[:, k] = _correlate(self.Dm, self.Rt[k])
        self.atoms = [set() for _ in range(self.M)]

    def add(self, pairs):
        """Add pairs to the support; returns False if none of them is new."""
        changed = set()
        for j, k in pairs:
            if j not in self.atoms[k]:
                self.atoms[k].add(j)
                changed.add(k)
        if not changed:
            return False
        cols = sorted(changed)
        _solve_columns(self.Dm, self.St, self.X, self.Rt, self.atoms, cols)
        for k in cols:
            self.C[:, k] = _correlate(self.Dm, self.Rt[k])
        return True

    def norm(self):
        return float(np.linalg.norm(self.Rt))


# -- selection -----------------------------------------------------------------

def greedy_choice(C, mspace: PointSpace, pspace: PointSpace, params: FeasibleParams,
                  floor: float = 0.0, beta: float | None = None, col_max=None) -> Pattern:
    """Greedy structured selection from the correlation matrix ``C`` (atoms x measurements).

    Repeatedly takes the largest remaining entry among candidate measurements,
    then discards every entry that would break the Lipschitz condition
    against it and widens the candidate set to all measurements within sigma
    of a selected one. Entries at or below ``floor`` are never selected, so
    the returned pattern lies inside the support of ``C``. With ``beta``
    set, entries not exceeding ``beta * col_max[k]`` are also excluded.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape != (len(pspace), len(mspace)):
        raise ValueError(f"correlation shape {C.shape} does not match spaces "
                         f"({len(pspace)} atoms, {len(mspace)} measurements)")
    if beta is not None and col_max is None:
        raise ValueError("beta threshold requires col_max")
    work = np.where(C > floor, C, 0.0)
    if beta is not None:
        col_max = np.asarray(col_max, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(col_max > 0, C / col_max, 0.0)
        work[ratio <= beta] = 0.0
    dm, dp = mspace.matrix, pspace.matrix
    sigma, tau = params.sigma, params.tau
    cand = None
    selected = []
    while True:
        cols = np.arange(work.shape[1]) if cand is None else np.flatnonzero(cand)
        if cols.size == 0:
            break
        sub = work[:, cols]
        flat = int(np.argmax(sub))
        j, c = divmod(flat, sub.shape[1])
        if not sub[j, c] > 0:
            break
        k = int(cols[c])
        selected.append((j, k))
        work[j, k] = 0.0
        if math.isinf(tau):
            same = dm[k] == 0
            work[np.ix_(dp[j] > 0, same)] = 0.0
        else:
            work[~within(dp[j][:, None], scaled(tau, dm[k])[None, :])] = 0.0
        near = within(dm[k], sigma)
        cand = near if cand is None else cand | near
    return Pattern(selected)


def _stalled(state, rnorm, stop, floor):
    # nothing above the floor means the residual is orthogonal to every atom:
    # that is convergence to the least-squares fit, not stagnation
    return rnorm > stop.residual_tol and bool(state.C.max() > floor)


# -- solvers --------------------------------------------------------------------

def gm_omp(D: Dictionary, S, mspace: PointSpace, params: FeasibleParams,
           stop: StopCriteria) -> Solution:
    """Generalized OMP for multiple measurements.

    Each iteration computes C = |D^T R|, adds the pattern returned by
    :func:`greedy_choice` to the support, and re-solves the restricted least
    squares problem. Stops after ``stop.max_iterations`` iterations, once the
    residual norm reaches ``stop.residual_tol``, or when the greedy choice
    adds nothing new. ``stagnated`` is set in the last case when the residual
    is above tolerance and some correlation still exceeds the floor.
    """
    state = _Residual(D, S)
    if len(mspace) != state.M:
        raise ValueError(f"measurement space has {len(mspace)} points but data has {state.M} columns")
    floor = stop.floor(state.C)
    sol = Solution(state.X, method="gm-omp")
    rnorm = state.norm()
    if rnorm <= stop.residual_tol:
        return sol
    for _ in stop.iterations():
        col_max = state.C.max(axis=0)
        pattern = greedy_choice(state.C, mspace, D.pspace, params, floor, stop.beta, col_max)
        ratios = [state.C[j, k] / col_max[k] for j, k in sorted(pattern)]
        if not pattern or not state.add(pattern):
            sol.stagnated = _stalled(state, rnorm, stop, floor)
            break
        sol.patterns.append(pattern)
        sol.weakness_trace.extend(float(r) for r in ratios)
        rnorm = state.norm()
        sol.residual_norms.append(rnorm)
        if rnorm <= stop.residual_tol:
            break
    return sol


def omp(D: Dictionary, s, stop: StopCriteria):
    """Orthogonal matching pursuit for a single vector.

    Returns ``(x, support)`` with ``support`` the selected atoms in selection
    order. The residual tolerance applies to the Euclidean norm of the residual.
    """
    Dm = D.atoms
    s = np.ascontiguousarray(s, dtype=float)
    if s.ndim != 1 or s.shape[0] != Dm.shape[0]:
        raise ValueError(f"vector of shape {s.shape} does not match dictionary shape {Dm.shape}")
    x = np.zeros(Dm.shape[1])
    r = s.copy()
    c = _correlate(Dm, r)
    floor = stop.floor(c)
    support = []
    if float(np.linalg.norm(r)) <= stop.residual_tol:
        return x, support
    for _ in stop.iterations():
        i = int(np.argmax(c))
        if not c[i] > floor or i in support:
            break
        support.append(i)
        idx = sorted(support)
        A = Dm[:, idx]
        y, r = _solve_with(A, _factor(A), s)
        x[:] = 0.0
        x[idx] = y
        c = _correlate(Dm, r)
        if float(np.linalg.norm(r)) <= stop.residual_tol:
            break
    return x, support


def omp_per_column(D: Dictionary, S, stop: StopCriteria) -> Solution:
    """OMP applied independently to every column of S."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != D.n_samples:
        raise ValueError(f"data shape {S.shape} does not match dictionary shape {D.shape}")
    X = np.zeros((D.n_atoms, S.shape[1]))
    by_iter = []
    for k in range(S.shape[1]):
        x, support = omp(D, S[:, k], stop)
        X[:, k] = x
        for l, j in enumerate(support):
            if len(by_iter) <= l:
                by_iter.append([])
            by_iter[l].append((j, k))
    sol = Solution(X, [Pattern(p) for p in by_iter], method="omp")
    # per-iteration residual norms after the fact, for reporting only
    support = set()
    for pat in sol.patterns:
        support |= pat
        _, R = restricted_least_squares(D, S, support)
        sol.residual_norms.append(float(np.linalg.norm(R)))
    # every per-column pick is its column maximum
    sol.weakness_trace = [1.0] * sum(len(p) for p in sol.patterns)
    return sol


def omp_vectorized(D: Dictionary, S, stop: StopCriteria) -> Solution:
    """OMP on the vectorized problem (block-diagonal dictionary, stacked columns).

    One (atom, measurement) pair is added per iteration: the global maximum
    of |D^T R|.
    """
    state = _Residual(D, S)
    floor = stop.floor(state.C)
    sol = Solution(state.X, method="omp-vectorized")
    rnorm = state.norm()
    if rnorm <= stop.residual_tol:
        return sol
    for _ in stop.iterations():
        j, k = divmod(int(np.argmax(state.C)), state.M)
        if not state.C[j, k] > floor or not state.add([(j, k)]):
            sol.stagnated = _stalled(state, rnorm, stop, floor)
            break
        sol.patterns.append(Pattern([(j, k)]))
        sol.weakness_trace.append(1.0)
        rnorm = state.norm()
        sol.residual_norms.append(rnorm)
        if rnorm <= stop.residual_tol:
            break
    return sol


def somp(D: Dictionary, S, lambda_norm: float = 1.0, stop: StopCriteria | None = None) -> Solution:
    """Row-sparse pursuit: each iteration adds the whole row with the largest lambda-norm of D^T R.

    ``lambda_norm = 1`` is simultaneous OMP (S-OMP); ``math.inf`` selects by
    the row maximum.
    """
    if not lambda_norm >= 1:
        raise ValueError(f"lambda_norm must be >= 1, got {lambda_norm}")
    if stop is None:
        raise ValueError("stop criteria are required")
    state = _Residual(D, S)
    floor = stop.floor(state.C)
    sol = Solution(state.X, method="somp")
    rnorm = state.norm()
    if rnorm <= stop.residual_tol:
        return sol
    for _ in stop.iterations():
        if not state.C.max() > floor:
            sol.stagnated = _stalled(state, rnorm, stop, floor)
            break
        col_max = state.C.max(axis=0)
        norms = np.linalg.norm(state.C, ord=lambda_norm, axis=1)
        i = int(np.argmax(norms))
        pattern = Pattern((i, k) for k in range(state.M))
        ratios = [state.C[i, k] / col_max[k] if col_max[k] > 0 else 0.0 for k in range(state.M)]
        if not state.add(pattern):
            sol.stagnated = _stalled(state, rnorm, stop, floor)
            break
        sol.patterns.append(pattern)
        sol.weakness_trace.extend(float(r) for r in ratios)
        rnorm = state.norm()
        sol.residual_norms.append(rnorm)
        if rnorm <= stop.residual_tol:
            break
    return sol
