"""Structural denoising of recovered patterns and their amplitudes.

A column-sparse pattern is read as samples of a function from measurement
coordinates to parameter coordinates. Fitting a low-degree polynomial to it
and rounding back onto the dictionary grid removes jitter and fills gaps
(inpainting). Only 1-D measurement and parameter spaces are supported for
pattern fitting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .spaces import Pattern, PointSpace, pairwise_distances


@dataclass
class FittedStructure:
    """Polynomial f (ascending coefficients in the original frame) on a support interval."""

    coefficients: list
    support_interval: tuple
    residual: float
    degree: int
    _poly: Polynomial | None = field(default=None, repr=False, compare=False)

    def __call__(self, x):
        poly = self._poly if self._poly is not None else Polynomial(self.coefficients)
        return poly(np.asarray(x, dtype=float))

    def to_dict(self):
        return {"degree": self.degree,
                "coefficients": [float(c) for c in self.coefficients],
                "support_interval": [float(v) for v in self.support_interval],
                "residual": float(self.residual)}


def _require_1d(*spaces):
    for s in spaces:
        if s.dim != 1:
            raise ValueError(f"pattern denoising needs 1-D spaces, got dimension {s.dim}")


def _polyfit(x, y, degree):
    lo, hi = float(x.min()), float(x.max())
    domain = [lo - 1.0, hi + 1.0] if lo == hi else [lo, hi]
    n_distinct = np.unique(x).size
    if degree >= n_distinct:
        warnings.warn(f"degree {degree} >= {n_distinct} distinct measurement points; "
                      "returning the minimum-norm fit", RuntimeWarning, stacklevel=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", np.exceptions.RankWarning)
        poly = Polynomial.fit(x, y, degree, domain=domain)
    resid = float(np.sqrt(np.sum((y - poly(x)) ** 2)))
    return poly, resid


def _structure(poly, interval, resid, degree):
    coef = poly.convert().coef
    coef = np.concatenate([coef, np.zeros(degree + 1 - coef.size)])
    return FittedStructure([float(c) for c in coef], interval, resid, degree, poly)


def fit_pattern_polynomial(pattern, mspace: PointSpace, pspace: PointSpace,
                           degree: int, delta: float = 0.0) -> FittedStructure:
    """Least-squares polynomial of ``degree`` mapping measurement to parameter coordinates.

    With ``delta == 0`` the support interval is the hull of the pattern's
    measurement coordinates. With ``delta > 0`` every interval whose
    endpoints are pattern coordinates is scored as

        fit residual + delta * (#measurement points inside)
                     + (parameter range) * (#pattern points left outside)

    and the minimizer is returned.
    """
    _require_1d(mspace, pspace)
    if not pattern:
        raise ValueError("cannot fit an empty pattern")
    if degree < 0 or delta < 0:
        raise ValueError("degree and delta must be non-negative")
    atoms, meas = Pattern(pattern).arrays()
    x = mspace.points[meas, 0]
    y = pspace.points[atoms, 0]
    if delta == 0:
        poly, resid = _polyfit(x, y, degree)
        return _structure(poly, (float(x.min()), float(x.max())), resid, degree)

    mcoord = mspace.points[:, 0]
    penalty = float(y.max() - y.min())
    if penalty == 0:
        penalty = pspace.min_separation() if len(pspace) > 1 else 1.0
    xs = np.unique(x)
    best = None
    for a in range(xs.size):
        for b in range(a, xs.size):
            lo, hi = xs[a], xs[b]
            inside = (x >= lo) & (x <= hi)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                poly, resid = _polyfit(x[inside], y[inside], degree)
            n_cover = int(np.count_nonzero((mcoord >= lo) & (mcoord <= hi)))
            score = resid + delta * n_cover + penalty * int(np.count_nonzero(~inside))
            if best is None or score < best[0]:
                best = (score, poly, (float(lo), float(hi)), resid)
    _, poly, interval, resid = best
    return _structure(poly, interval, resid, degree)


def round_to_parameter(value, pspace: PointSpace) -> int:
    """Index of the parameter point closest to ``value`` (lowest index on ties)."""
    v = np.atleast_1d(np.asarray(value, dtype=float)).reshape(1, -1)
    return int(round_to_parameters(v, pspace)[0])


def round_to_parameters(values, pspace: PointSpace):
    """Vectorized :func:`round_to_parameter`; ``values`` has one row per query."""
    if len(pspace) == 0:
        raise ValueError("empty parameter space")
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    d = pairwise_distances(v, pspace.points, pspace.metric)
    return np.argmin(d, axis=1)


def denoise_pattern(pattern, mspace: PointSpace, pspace: PointSpace,
                    degree: int, delta: float = 0.0, fitted: FittedStructure | None = None) -> Pattern:
    """Replace a pattern by its fitted polynomial rounded onto the parameter grid.

    Every measurement point inside the support interval receives exactly one
    atom, so gaps inside the interval are filled.
    """
    f = fitted if fitted is not None else fit_pattern_polynomial(pattern, mspace, pspace, degree, delta)
    lo, hi = f.support_interval
    mcoord = mspace.points[:, 0]
    ks = np.flatnonzero((mcoord >= lo) & (mcoord <= hi))
    js = round_to_parameters(f(mcoord[ks]), pspace)
    return Pattern(zip(js.tolist(), ks.tolist()))


def _amplitude_model(values, coords, degree):
    if degree == 0 or coords is None:
        mean = float(np.mean(values))
        return lambda x: np.full(np.shape(x)[0], mean)
    degree = min(degree, np.unique(coords).size - 1)
    if degree == 0:
        mean = float(np.mean(values))
        return lambda x: np.full(np.shape(x)[0], mean)
    poly, _ = _polyfit(coords, values, degree)
    return poly


def denoise_amplitudes(X, pattern, mspace: PointSpace, degree: int = 0):
    """Replace the amplitudes on ``pattern`` by a least-squares polynomial in the measurement coordinate.

    ``degree == 0`` sets them to their mean and works in any dimension;
    higher degrees need a 1-D measurement space.
    """
    if not pattern:
        raise ValueError("cannot denoise the amplitudes of an empty pattern")
    if degree > 0:
        _require_1d(mspace)
    X = np.array(X, dtype=float, copy=True)
    atoms, meas = Pattern(pattern).arrays()
    values = X[atoms, meas]
    coords = mspace.points[meas, 0] if degree > 0 else None
    model = _amplitude_model(values, coords, degree)
    X[atoms, meas] = model(coords if coords is not None else meas)
    return X


def transfer_amplitudes(X, source, target, mspace: PointSpace, degree: int | None = None):
    """Move the amplitudes of ``source`` onto the denoised pattern ``target``.

    With ``degree=None`` a measurement keeps its amplitude and inpainted
    measurements get the source mean. With a degree, every target entry is
    set from the amplitude polynomial fitted on the source.
    """
    X = np.array(X, dtype=float, copy=True)
    if not source:
        return X
    atoms, meas = Pattern(source).arrays()
    values = X[atoms, meas].copy()
    X[atoms, meas] = 0.0
    if degree is None:
        by_meas = {}
        for j, k, v in zip(atoms, meas, values):
            by_meas.setdefault(int(k), v)
        mean = float(np.mean(values))
        for j, k in target:
            X[j, k] = by_meas.get(k, mean)
        return X
    if degree > 0:
        _require_1d(mspace)
    coords = mspace.points[meas, 0] if degree > 0 else None
    model = _amplitude_model(values, coords, degree)
    tj, tk = Pattern(target).arrays()
    if tj.size:
        X[tj, tk] = model(mspace.points[tk, 0] if coords is not None else tk)
    return X
