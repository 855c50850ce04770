"""Parameter and measurement spaces, and the feasibility predicates of F(sigma, tau).

Indices are 0-based throughout the Python API. A pattern is a set of
``(atom, measurement)`` pairs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.spatial.distance import cdist

INF = math.inf

EARTH_RADIUS_KM = 6371.0

# Relative slack on the sigma / tau comparisons so that boundary cases such as
# sqrt(2n) <= sqrt(n) * sqrt(2) are not decided by a rounding ulp.
RTOL = 1e-12


class MetricKind(str, enum.Enum):
    ABSOLUTE_1D = "absolute-1d"
    EUCLIDEAN = "euclidean-nd"
    CHEBYSHEV = "chebyshev-nd"
    HAVERSINE = "haversine-geodetic-km"


def _haversine(a, b):
    lat1, lon1 = np.radians(a[:, 0])[:, None], np.radians(a[:, 1])[:, None]
    lat2, lon2 = np.radians(b[:, 0])[None, :], np.radians(b[:, 1])[None, :]
    h = (np.sin((lat2 - lat1) / 2) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def pairwise_distances(a, b, metric):
    """Distance matrix between the rows of ``a`` and ``b`` under ``metric``."""
    metric = MetricKind(metric)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if metric is MetricKind.ABSOLUTE_1D:
        return np.abs(a[:, 0][:, None] - b[:, 0][None, :])
    if metric is MetricKind.EUCLIDEAN:
        return cdist(a, b, "euclidean")
    if metric is MetricKind.CHEBYSHEV:
        return cdist(a, b, "chebyshev")
    return _haversine(a, b)


@dataclass(frozen=True, eq=False)
class PointSpace:
    """An ordered set of points in a metric space.

    ``points`` has shape ``(n, dim)``. For ``haversine-geodetic-km`` the two
    coordinates are latitude and longitude in degrees.
    """

    points: np.ndarray
    metric: MetricKind = MetricKind.ABSOLUTE_1D

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ValueError(f"points must be an (n, dim) array, got shape {pts.shape}")
        metric = MetricKind(self.metric)
        if metric is MetricKind.ABSOLUTE_1D and pts.shape[1] != 1:
            raise ValueError(f"absolute-1d metric needs 1-D points, got dimension {pts.shape[1]}")
        if metric is MetricKind.HAVERSINE and pts.shape[1] != 2:
            raise ValueError(f"haversine metric needs (lat, lon) points, got dimension {pts.shape[1]}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "metric", metric)

    @classmethod
    def line(cls, n, spacing=1.0, start=1.0):
        """Points ``start, start + spacing, ...`` on the real line."""
        return cls(start + spacing * np.arange(n, dtype=float), MetricKind.ABSOLUTE_1D)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @cached_property
    def matrix(self):
        """Full pairwise distance matrix (computed once, O(n^2) memory)."""
        d = pairwise_distances(self.points, self.points, self.metric)
        np.fill_diagonal(d, 0.0)
        d.setflags(write=False)
        return d

    def _check(self, i):
        if not 0 <= i < len(self):
            raise IndexError(f"point index {i} out of range for space of size {len(self)}")

    def distance(self, i, i2):
        self._check(i)
        self._check(i2)
        if i == i2:
            return 0.0
        return float(pairwise_distances(self.points[i], self.points[i2], self.metric)[0, 0])

    def min_separation(self):
        """Smallest distance between two distinct points (inf for fewer than 2)."""
        if len(self) < 2:
            return INF
        d = self.matrix[~np.eye(len(self), dtype=bool)]
        return float(d.min())


def distance(space: PointSpace, i: int, i2: int) -> float:
    return space.distance(i, i2)


def scaled(tau, d):
    """``tau * d`` with the convention inf * 0 = 0 (works on arrays)."""
    d = np.asarray(d, dtype=float)
    if math.isinf(tau):
        return np.where(d == 0, 0.0, INF)
    return tau * d


def within(d, bound):
    """``d <= bound`` up to the relative slack ``RTOL``."""
    return np.asarray(d) <= np.asarray(bound) * (1 + RTOL)


@dataclass(frozen=True)
class FeasibleParams:
    """Connectivity radius ``sigma`` and Lipschitz constant ``tau``; both may be ``INF``."""

    sigma: float
    tau: float

    def __post_init__(self):
        sigma, tau = float(self.sigma), float(self.tau)
        if math.isnan(sigma) or math.isnan(tau) or sigma < 0 or tau < 0:
            raise ValueError(f"sigma and tau must be non-negative, got ({self.sigma}, {self.tau})")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "tau", tau)


class Pattern(frozenset):
    """A set of ``(atom, measurement)`` index pairs."""

    def __new__(cls, pairs: Iterable = ()):
        return super().__new__(cls, ((int(j), int(k)) for j, k in pairs))

    def __repr__(self):
        return f"Pattern({sorted(self)})"

    def arrays(self):
        """Atom and measurement indices as arrays, sorted by (measurement, atom)."""
        if not self:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        pairs = sorted(self, key=lambda p: (p[1], p[0]))
        a = np.array(pairs, dtype=int)
        return a[:, 0], a[:, 1]

    @property
    def measurements(self):
        return sorted({k for _, k in self})

    def is_column_sparse(self):
        """True if no measurement carries more than one atom."""
        return len(self.measurements) == len(self)

    def as_dict(self):
        """Map measurement -> atom (only meaningful for column-sparse patterns)."""
        return {k: j for j, k in self}


def _validate(pattern, mspace, pspace=None):
    for j, k in pattern:
        if not 0 <= k < len(mspace):
            raise IndexError(f"measurement index {k} out of range ({len(mspace)} points)")
        if pspace is not None and not 0 <= j < len(pspace):
            raise IndexError(f"atom index {j} out of range ({len(pspace)} points)")


def is_connected(pattern, mspace: PointSpace, sigma: float) -> bool:
    """Whether the measurement points of ``pattern`` form a connected graph at radius sigma.

    Union-find over all point pairs within ``sigma``; O(n^2) in the number of
    distinct measurements of the pattern.
    """
    _validate(pattern, mspace)
    meas = sorted({k for _, k in pattern})
    if len(meas) <= 1 or math.isinf(sigma):
        return True
    d = mspace.matrix[np.ix_(meas, meas)]
    ds = DisjointSet(range(len(meas)))
    rows, cols = np.nonzero(np.triu(within(d, sigma), k=1))
    for a, b in zip(rows, cols):
        ds.merge(int(a), int(b))
    return ds.n_subsets == 1


def satisfies_lipschitz(pattern, mspace: PointSpace, pspace: PointSpace, tau: float) -> bool:
    """Whether every two pairs satisfy d_param <= tau * d_meas."""
    _validate(pattern, mspace, pspace)
    if len(pattern) <= 1:
        return True
    atoms, meas = Pattern(pattern).arrays()
    dp = pspace.matrix[np.ix_(atoms, atoms)]
    dm = mspace.matrix[np.ix_(meas, meas)]
    return bool(np.all(within(dp, scaled(tau, dm))))


def is_feasible(pattern, mspace: PointSpace, pspace: PointSpace, params: FeasibleParams) -> bool:
    return (satisfies_lipschitz(pattern, mspace, pspace, params.tau)
            and is_connected(pattern, mspace, params.sigma))


def are_intersecting(a, b, mspace: PointSpace, pspace: PointSpace, params: FeasibleParams) -> bool:
    """Whether some cross pair of ``a`` and ``b`` satisfies both feasibility conditions."""
    if not a or not b:
        raise ValueError("are_intersecting needs two non-empty patterns")
    _validate(a, mspace, pspace)
    _validate(b, mspace, pspace)
    ja, ka = Pattern(a).arrays()
    jb, kb = Pattern(b).arrays()
    dm = mspace.matrix[np.ix_(ka, kb)]
    dp = pspace.matrix[np.ix_(ja, jb)]
    close = within(dm, params.sigma) if not math.isinf(params.sigma) else np.ones_like(dm, bool)
    return bool(np.any(close & within(dp, scaled(params.tau, dm))))
