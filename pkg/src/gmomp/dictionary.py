"""Normalized dictionaries with an attached parameter space.

All builders return real, column-normalized atom matrices of shape (T, P).
Convolution dictionaries truncate at the signal boundary (no wrap-around) and
renormalize, so edge atoms also have unit norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spaces import MetricKind, PointSpace

GAUSS_CUTOFF = 8.0
MAX_BSPLINE_ORDER = 25


def normalize_columns(matrix):
    """Divide every column by its Euclidean norm.

    Raises
    ------
    ValueError
        If a column is identically zero; the message names its (0-based) index.
    """
    a = np.array(matrix, dtype=float, copy=True)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    norms = np.linalg.norm(a, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"dictionary column {int(zero[0])} is all zeros")
    return a / norms


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Unit-norm atoms (columns of ``atoms``) and their parameter points.

    ``kind`` and ``params`` record the builder so a dictionary can be rebuilt
    from configuration alone.
    """

    atoms: np.ndarray
    pspace: PointSpace
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        a = normalize_columns(self.atoms)
        if len(self.pspace) != a.shape[1]:
            raise ValueError(
                f"parameter space has {len(self.pspace)} points but dictionary has {a.shape[1]} atoms")
        a.setflags(write=False)
        object.__setattr__(self, "atoms", a)

    @property
    def shape(self):
        return self.atoms.shape

    @property
    def n_samples(self):
        return self.atoms.shape[0]

    @property
    def n_atoms(self):
        return self.atoms.shape[1]

    def gram(self):
        return self.atoms.T @ self.atoms


def _shift_dictionary(kernel, T, centers, grid):
    # column j samples kernel(grid - centers[j])
    return kernel(grid[:, None] - centers[None, :])


def gaussian_conv_dictionary(T: int, std_dev: float) -> Dictionary:
    """Convolution dictionary of a sampled Gaussian kernel.

    Column j (1-based) is ``exp(-(t - j)^2 / (2 std_dev^2))`` for t = 1..T,
    with entries beyond 8 standard deviations set to exactly zero.
    Parameter points are p_j = j.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not std_dev > 0:
        raise ValueError(f"std_dev must be positive, got {std_dev}")
    grid = np.arange(1, T + 1, dtype=float)

    def kernel(u):
        g = np.exp(-(u ** 2) / (2.0 * std_dev ** 2))
        g[np.abs(u) > GAUSS_CUTOFF * std_dev] = 0.0
        return g

    atoms = _shift_dictionary(kernel, T, grid, grid)
    return Dictionary(atoms, PointSpace(grid, MetricKind.ABSOLUTE_1D),
                      kind="gaussian", params={"T": T, "std_dev": float(std_dev)})


def gabor_impulse(t, theta, phi, psi):
    """g(t) = exp(-theta t^2) cos(phi t + psi)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-theta * t ** 2) * np.cos(phi * t + psi)


def gabor_conv_dictionary(T: int, theta: float, phi: float, psi: float, dt: float) -> Dictionary:
    """Convolution dictionary of the Gabor impulse sampled with spacing ``dt``.

    Parameter points are the shifts p_j = dt * j (same unit as dt, e.g. µs).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid = dt * np.arange(1, T + 1, dtype=float)
    atoms = _shift_dictionary(lambda u: gabor_impulse(u, theta, phi, psi), T, grid, grid)
    return Dictionary(atoms, PointSpace(grid, MetricKind.ABSOLUTE_1D), kind="gabor",
                      params={"T": T, "theta": float(theta), "phi": float(phi),
                              "psi": float(psi), "dt": float(dt)})


def bspline_eval(n: int, t):
    """Centered cardinal B-spline of order ``n`` evaluated at ``t``.

    B_1 is the indicator of [-0.5, 0.5); higher orders use the uniform-knot
    recursion

        B_k(x) = ((x + k/2) B_{k-1}(x + 1/2) + (k/2 - x) B_{k-1}(x - 1/2)) / (k - 1)

    evaluated bottom-up on the half-integer offsets it needs, which is exact
    piecewise-polynomial arithmetic. Returns a float for scalar ``t``.
    """
    if n < 1:
        raise ValueError(f"B-spline order must be >= 1, got {n}")
    if n > MAX_BSPLINE_ORDER:
        raise ValueError(f"B-spline order above {MAX_BSPLINE_ORDER} is not supported")
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    # level k needs offsets s/2 with s in -(n-k)..(n-k), step 2
    vals = {s: ((t + s / 2 >= -0.5) & (t + s / 2 < 0.5)).astype(float)
            for s in range(-(n - 1), n, 2)}
    for k in range(2, n + 1):
        vals = {s: ((t + s / 2 + k / 2) * vals[s + 1] + (k / 2 - t - s / 2) * vals[s - 1]) / (k - 1)
                for s in range(-(n - k), n - k + 1, 2)}
    out = vals[0]
    return float(out) if scalar else out


def bspline_dictionary(T: int, max_order: int, metric=MetricKind.CHEBYSHEV) -> Dictionary:
    """All integer shifts 1..T of B_n for n = 1..max_order, sampled at t = 1..T.

    Columns are ordered by order, then shift. Parameter points are
    (shift, order) pairs, compared with the Chebyshev metric by default.
    """
    if T < 1 or max_order < 1:
        raise ValueError("T and max_order must be >= 1")
    grid = np.arange(1, T + 1, dtype=float)
    cols, pts = [], []
    for n in range(1, max_order + 1):
        block = bspline_eval(n, grid[:, None] - grid[None, :])
        cols.append(block)
        pts.extend((s, n) for s in range(1, T + 1))
    atoms = np.hstack(cols)
    return Dictionary(atoms, PointSpace(np.array(pts, dtype=float), metric), kind="bspline",
                      params={"T": T, "max_order": max_order, "metric": MetricKind(metric).value})


def identity_dictionary(P: int) -> Dictionary:
    return Dictionary(np.eye(P), PointSpace.line(P), kind="identity", params={"P": P})


BUILDERS = {
    "gaussian": gaussian_conv_dictionary,
    "gabor": gabor_conv_dictionary,
    "bspline": bspline_dictionary,
    "identity": identity_dictionary,
}


def build_dictionary(kind: str, **params) -> Dictionary:
    """Build a dictionary by builder name (``gaussian``, ``gabor``, ``bspline``, ``identity``)."""
    try:
        builder = BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown dictionary kind {kind!r}") from None
    if kind == "gaussian" and isinstance(params.get("std_dev"), str):
        params["std_dev"] = _parse_real(params["std_dev"])
    return builder(**params)


def _parse_real(text):
    # accepts "sqrt(2.5)" as a convenience for configs
    text = text.strip()
    if text.startswith("sqrt(") and text.endswith(")"):
        return math.sqrt(float(text[5:-1]))
    return float(text)
