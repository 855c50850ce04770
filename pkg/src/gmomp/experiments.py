"""Synthetic benchmarks: the slope sweep and the pattern-noise experiments.

Every trial draws its noise from ``numpy.random.default_rng(base_seed + trial)``,
so a trial's data does not depend on how many trials run or in which order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .analysis import uniform_noise_tau
from .dictionary import gaussian_conv_dictionary
from .postprocess import denoise_pattern, transfer_amplitudes
from .solver import StopCriteria, gm_omp, omp_per_column, omp_vectorized, somp
from .spaces import FeasibleParams, Pattern, PointSpace

METHODS = ("omp", "omp-vectorized", "somp", "gm-omp")
KINDS = ("slope", "uniform", "bernoulli")
DEFAULT_VALUES = {
    "slope": [float(a) for a in range(0, 50, 5)],
    "uniform": [1.0, 2.0, 3.0, 4.0],
    "bernoulli": [0.05, 0.1, 0.15, 0.2, 0.25],
}


@dataclass
class ExperimentConfig:
    """Benchmark settings. ``values`` are angles in degrees (slope) or noise levels."""

    kind: str = "slope"
    size: int = 256
    values: list = field(default_factory=list)
    trials: int = 100
    base_seed: int = 0
    std_dev: float = math.sqrt(2.5)
    methods: list = field(default_factory=lambda: list(METHODS))
    sigma: float = 1.0
    tau: float = 1.0
    bernoulli_sigma: float = 6.0
    pattern_degree: int = 4
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.values:
            self.values = list(DEFAULT_VALUES[self.kind])
        self.values = [float(v) for v in self.values]
        if self.size < 2:
            raise ValueError("size must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.kind == "slope" and any(not 0 <= v <= 45 for v in self.values):
            raise ValueError("angles must lie in [0, 45] degrees")
        if self.kind == "bernoulli" and any(not 0 <= v <= 1 for v in self.values):
            raise ValueError("Bernoulli levels must lie in [0, 1]")
        if self.kind == "uniform" and any(v < 0 for v in self.values):
            raise ValueError("uniform noise levels must be non-negative")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(int)


def make_slope_matrix(N: int, xi: float):
    """N x N matrix with a single line of ones at slope ``xi`` degrees.

    Column j (1-based) holds its one in row round(j tan xi), clamped to [1, N].
    """
    if not 0 <= xi <= 45:
        raise ValueError(f"angle must lie in [0, 45] degrees, got {xi}")
    j = np.arange(1, N + 1)
    rows = np.clip(round_half_up(j * math.tan(math.radians(xi))), 1, N)
    X = np.zeros((N, N))
    X[rows - 1, j - 1] = 1.0
    return X


def _column_entries(X):
    X = np.asarray(X, dtype=float)
    nz = X != 0
    if np.any(nz.sum(axis=0) > 1):
        raise ValueError("pattern noise needs 1-sparse columns")
    cols = np.flatnonzero(nz.any(axis=0))
    rows = np.argmax(nz[:, cols], axis=0)
    return rows, cols


def add_uniform_pattern_noise(X, eps_u: float, seed: int):
    """Shift every nonzero entry along its column by a rounded uniform draw in [-eps_u, eps_u]."""
    X = np.asarray(X, dtype=float)
    rows, cols = _column_entries(X)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-eps_u, eps_u, size=X.shape[1])
    bound = math.floor(eps_u)
    shift = np.clip(round_half_up(u[cols]), -bound, bound)
    new_rows = np.clip(rows + shift, 0, X.shape[0] - 1)
    out = np.zeros_like(X)
    out[new_rows, cols] = X[rows, cols]
    return out


def add_bernoulli_pattern_noise(X, eps_b: float, seed: int):
    """Delete every nonzero entry independently with probability ``eps_b``."""
    X = np.asarray(X, dtype=float)
    rows, cols = _column_entries(X)
    rng = np.random.default_rng(seed)
    drop = rng.random(X.shape[1]) < eps_b
    out = X.copy()
    gone = drop[cols]
    out[rows[gone], cols[gone]] = 0.0
    return out


def mse(X, Xhat) -> float:
    X, Xhat = np.asarray(X, dtype=float), np.asarray(Xhat, dtype=float)
    if X.shape != Xhat.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Xhat.shape}")
    return float(np.mean((X - Xhat) ** 2))


@lru_cache(maxsize=4)
def _dictionary(N, std_dev):
    return gaussian_conv_dictionary(N, std_dev)


def run_method(method, D, S, mspace, params=None):
    """Run one benchmark method with its fixed experiment settings."""
    N = S.shape[1]
    tol = 1e-9 * float(np.linalg.norm(S))
    if method == "omp":
        return omp_per_column(D, S, StopCriteria(max_iterations=1))
    if method == "omp-vectorized":
        return omp_vectorized(D, S, StopCriteria(max_iterations=N, residual_tol=tol))
    if method == "somp":
        return somp(D, S, 1.0, StopCriteria(max_iterations=D.n_atoms, residual_tol=tol))
    if method == "gm-omp":
        return gm_omp(D, S, mspace, params, StopCriteria(max_iterations=1))
    raise ValueError(f"unknown method {method!r}")


def _slope_point(cfg: ExperimentConfig, xi: float):
    N = cfg.size
    D = _dictionary(N, cfg.std_dev)
    mspace = PointSpace.line(N)
    X = make_slope_matrix(N, xi)
    S = D.atoms @ X
    rows = []
    for method in cfg.methods:
        sol = run_method(method, D, S, mspace, FeasibleParams(cfg.sigma, cfg.tau))
        err = float(np.linalg.norm(X - sol.X))
        rows += [(method, xi, "error", err),
                 (method, xi, "relative_error", err / float(np.linalg.norm(X))),
                 (method, xi, "nnz", float(sol.nnz))]
    return rows


def run_slope_sweep(cfg: ExperimentConfig):
    """Reconstruction error and support size of every method over the angle grid.

    Returns rows ``(method, angle, metric, value)``.
    """
    results = _map(_slope_point, [(cfg, xi) for xi in cfg.values], cfg.threads)
    return [r for rows in results for r in rows]


def _noise_trial(cfg: ExperimentConfig, level: float, trial: int):
    N = cfg.size
    D = _dictionary(N, cfg.std_dev)
    mspace = PointSpace.line(N)
    X = np.zeros((N, N))
    X[math.ceil(N / 2) - 1, :] = 1.0
    seed = cfg.base_seed + trial
    if cfg.kind == "uniform":
        Xn = add_uniform_pattern_noise(X, level, seed)
        tau = uniform_noise_tau(cfg.tau, level, mspace.min_separation())[0]
        params = FeasibleParams(cfg.sigma, tau)
    else:
        Xn = add_bernoulli_pattern_noise(X, level, seed)
        params = FeasibleParams(cfg.bernoulli_sigma, cfg.tau)
    S = D.atoms @ Xn
    out = {}
    for method in cfg.methods:
        sol = run_method(method, D, S, mspace, params)
        Xhat = sol.X
        if method == "gm-omp":
            noised = Pattern(zip(*np.nonzero(Xn)))
            found = sol.patterns[0] if sol.patterns else Pattern()
            out["success"] = float(found == noised)
            if found:
                target = denoise_pattern(found, mspace, D.pspace, cfg.pattern_degree, 0.0)
                Xhat = transfer_amplitudes(Xhat, found, target, mspace)
        out[method] = mse(X, Xhat)
    return out


def run_noise_experiment(cfg: ExperimentConfig, kind: str | None = None):
    """Mean MSE against the clean matrix per noise level and method.

    GM-OMP runs with tau = 1 + 2 eps_u / m (uniform) or sigma = 6 (Bernoulli),
    followed by degree-4 pattern denoising; baselines are not post-processed.
    Returns rows ``(method, level, metric, value)`` with metrics ``mse`` and
    ``mse_se``, plus ``success`` for GM-OMP (fraction of trials whose first
    pattern is the whole noised structure).
    """
    if kind is not None and kind != cfg.kind:
        cfg = ExperimentConfig(**{**asdict(cfg), "kind": kind})
    if cfg.kind not in ("uniform", "bernoulli"):
        raise ValueError("noise experiment kind must be 'uniform' or 'bernoulli'")
    jobs = [(cfg, level, t) for level in cfg.values for t in range(cfg.trials)]
    results = _map(_noise_trial, jobs, cfg.threads)
    rows = []
    for li, level in enumerate(cfg.values):
        chunk = results[li * cfg.trials:(li + 1) * cfg.trials]
        for method in cfg.methods:
            vals = np.array([r[method] for r in chunk])
            rows += [(method, level, "mse", float(vals.mean())),
                     (method, level, "mse_se", float(vals.std(ddof=1) / math.sqrt(vals.size))
                      if vals.size > 1 else 0.0)]
            if method == "gm-omp":
                succ = np.array([r["success"] for r in chunk])
                rows += [(method, level, "success", float(succ.mean())),
                         (method, level, "success_se",
                          float(math.sqrt(succ.mean() * (1 - succ.mean()) / succ.size)))]
    return rows


def run_experiment(cfg: ExperimentConfig):
    return run_slope_sweep(cfg) if cfg.kind == "slope" else run_noise_experiment(cfg)


def _call(args):
    fn, a = args
    return fn(*a)


def _map(fn, arglist, threads):
    """Ordered map, in worker processes when ``threads > 1``."""
    if threads <= 1 or len(arglist) <= 1:
        return [fn(*a) for a in arglist]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(_call, [(fn, a) for a in arglist], chunksize=max(1, len(arglist) // (4 * threads))))


def write_results(rows, out_dir, config: ExperimentConfig, stem="results"):
    """Write ``<stem>.csv`` (method, parameter, metric, value) and a mirroring ``<stem>.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "parameter", "metric", "value"])
        for method, param, metric, value in rows:
            w.writerow([method, repr(float(param)), metric, repr(float(value))])
    cfg = {k: v for k, v in asdict(config).items() if k != "threads"}
    summary = {"config": cfg,
               "rows": [{"method": m, "parameter": p, "metric": k, "value": v} for m, p, k, v in rows]}
    json_path = out / f"{stem}.json"
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path
