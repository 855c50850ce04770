"""Recovery conditions and parameter-adaptation rules for GM-OMP."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dictionary import Dictionary
from .spaces import INF, MetricKind, PointSpace


def _abs_gram(D):
    G = np.abs(D.atoms.T @ D.atoms)
    np.fill_diagonal(G, 0.0)
    return G


def babel(D: Dictionary, l: int) -> float:
    """Babel function mu_1(l): worst cumulative coherence of l atoms against another atom.

    For each atom the l largest off-diagonal Gram magnitudes of its column are
    summed; the result is the maximum over atoms.
    """
    P = D.n_atoms
    if l < 0 or l >= P:
        raise ValueError(f"babel needs 0 <= l < P = {P}, got l = {l}")
    if l == 0:
        return 0.0
    G = -np.sort(-_abs_gram(D), axis=0)
    return float(G[:l].sum(axis=0).max())


def babel_values(D: Dictionary, L: int):
    """[mu_1(0), ..., mu_1(L)]."""
    P = D.n_atoms
    if L < 0 or L >= P:
        raise ValueError(f"babel needs 0 <= L < P = {P}, got L = {L}")
    G = -np.sort(-_abs_gram(D), axis=0)
    csum = np.cumsum(G[:L], axis=0)
    return [0.0] + [float(v) for v in csum.max(axis=1)]


def exact_recovery_condition(D: Dictionary, L: int, lam: float) -> bool:
    """mu_1(L) < lam * (1 - mu_1(L - 1))."""
    mu = babel_values(D, L)
    return mu[L] < lam * (1.0 - mu[L - 1])


def beta_threshold(D: Dictionary, L: int) -> float:
    """beta = mu_1(L) / (1 - mu_1(L - 1)); recovery with the beta filter needs beta <= 1."""
    mu = babel_values(D, L)
    if mu[L - 1] >= 1.0:
        raise ValueError(f"beta undefined: mu_1({L - 1}) = {mu[L - 1]:.6g} >= 1")
    return mu[L] / (1.0 - mu[L - 1])


@dataclass
class RecoveryReport:
    babel_values: list
    L: int
    lambda_: float
    beta: float
    condition_exact: bool
    condition_beta: bool

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d


def recovery_report(D: Dictionary, L: int, lam: float = 1.0) -> RecoveryReport:
    if L < 1:
        raise ValueError("L must be >= 1")
    mu = babel_values(D, L)
    beta = beta_threshold(D, L)
    return RecoveryReport(
        babel_values=mu, L=L, lambda_=float(lam), beta=beta,
        condition_exact=bool(mu[L] < lam * (1.0 - mu[L - 1])),
        condition_beta=bool(beta <= 1.0),
    )


def uniform_noise_tau(tau: float, eps_u: float, m: float):
    """Lipschitz constants under uniform pattern noise of amplitude ``eps_u``.

    Returns ``(tau_hat, tau_separation)``: the constant the noised patterns
    satisfy, ``tau + 2 eps_u / m``, and the separation the clean patterns
    need, ``tau + 4 eps_u / m``. ``m`` is the smallest distance between two
    measurement points.
    """
    if not m > 0:
        raise ValueError(f"minimum measurement distance must be positive, got {m}")
    if eps_u < 0 or tau < 0:
        raise ValueError("tau and eps_u must be non-negative")
    return tau + 2.0 * eps_u / m, tau + 4.0 * eps_u / m


def bernoulli_connectivity_bound(eps_b: float, k: int, M: int) -> float:
    """Lower bound (1 - eps_b^k)^(M - k + 1) on staying connected at radius k * sigma."""
    if not 0.0 <= eps_b <= 1.0:
        raise ValueError(f"eps_b must lie in [0, 1], got {eps_b}")
    if k < 1 or M < 1 or k > M:
        raise ValueError(f"need 1 <= k <= M, got k={k}, M={M}")
    return (1.0 - eps_b ** k) ** (M - k + 1)


def path_survives(keep, k):
    """Whether the kept points of a unit-spaced path stay connected at radius k."""
    idx = np.flatnonzero(keep)
    return idx.size <= 1 or int(np.diff(idx).max()) <= k


def path_connectivity_frequency(eps_b: float, k: int, M: int, trials: int, base_seed: int = 0):
    """Monte-Carlo frequency that a length-M path with Bernoulli deletions stays connected.

    Trial t draws its deletions from ``numpy.random.default_rng(base_seed + t)``.
    Returns ``(frequency, standard_error)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    hits = np.empty(trials, dtype=bool)
    for t in range(trials):
        rng = np.random.default_rng(base_seed + t)
        keep = rng.random(M) >= eps_b
        hits[t] = path_survives(keep, k)
    freq = float(hits.mean())
    return freq, math.sqrt(max(freq * (1.0 - freq), 0.0) / trials)


@dataclass(frozen=True, eq=False)
class ColoringInstance:
    """A graph-coloring instance encoded as a structured selection problem.

    Atom ``color * n_vertices + vertex`` carries the label ``(color, vertex)``.
    Selecting one atom per measurement with correlation 1 in a feasible
    pattern is the same as a proper coloring of the graph.
    """

    mspace: PointSpace
    pspace: PointSpace
    D: Dictionary
    R: np.ndarray
    sigma: float
    tau: float
    degree: int
    labels: list
    edges: list


def coloring_reduction(n_vertices: int, edges, colors: int) -> ColoringInstance:
    """Build the selection instance for coloring a simple graph with ``colors`` colors.

    Every vertex is padded with dangling edges up to the maximum degree n.
    Measurement points are unit vectors e_i; the parameter of atom
    (color j, vertex k) is e'_j (x) chi_k, where chi_k has +1 on edges starting
    at k and -1 on edges ending at k. D is the identity and R[(j, k), i] = 1
    iff k = i. Feasibility uses sigma = inf and tau = sqrt(n).
    """
    if colors < 1:
        raise ValueError("need at least one color")
    edges = [tuple(sorted((int(u), int(v)))) for u, v in edges]
    if len(set(edges)) != len(edges) or any(u == v for u, v in edges):
        raise ValueError("graph must be simple")
    if any(not (0 <= u < n_vertices and 0 <= v < n_vertices) for u, v in edges):
        raise ValueError("edge endpoint out of range")
    deg = [0] * n_vertices
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    n = max(deg, default=0)
    # real edges start at u and end at v; dangling edges only start
    all_edges = [(u, v) for u, v in edges]
    for k in range(n_vertices):
        all_edges.extend((k, None) for _ in range(n - deg[k]))
    N = len(all_edges)
    chi = np.zeros((n_vertices, max(N, 1)))
    for e, (u, v) in enumerate(all_edges):
        chi[u, e] = 1.0
        if v is not None:
            chi[v, e] = -1.0
    params, labels = [], []
    for j in range(colors):
        ej = np.zeros(colors)
        ej[j] = 1.0
        for k in range(n_vertices):
            params.append(np.kron(ej, chi[k]))
            labels.append((j, k))
    P = colors * n_vertices
    pspace = PointSpace(np.array(params), MetricKind.EUCLIDEAN)
    mspace = PointSpace(np.eye(n_vertices), MetricKind.EUCLIDEAN)
    D = Dictionary(np.eye(P), pspace, kind="coloring-reduction",
                   params={"n_vertices": n_vertices, "colors": colors})
    R = np.zeros((P, n_vertices))
    for a, (_, k) in enumerate(labels):
        R[a, k] = 1.0
    return ColoringInstance(mspace, pspace, D, R, INF, math.sqrt(n), n, labels, edges)


def coloring_param_distance(n: int, same_color: bool, adjacent: bool) -> float:
    """Distance between the parameters of two distinct (color, vertex) atoms."""
    return math.sqrt(2 * n + 2) if same_color and adjacent else math.sqrt(2 * n)
