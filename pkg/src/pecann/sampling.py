"""Collocation-point generators for box domains.

All generators return a :class:`PointSet` (float64 coordinates plus column
labels) and are deterministic: pseudo-random sampling threads a numpy
``Generator`` seeded by the caller, and the Sobol sequence is unscrambled.
The all-zeros leading Sobol point is skipped, so the first point returned
on the unit square is (0.5, 0.5).

Measure-zero exclusions (material interfaces, coordinate singularities)
are handled by rejection: excluded draws are discarded and redrawn until
the requested count is reached.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .exceptions import ConfigurationError

__all__ = [
    "PointSet",
    "uniform_box",
    "sobol_box",
    "boundary_trace",
    "periodic_faces",
    "fixed_points",
    "resample_seed",
]


@dataclass(frozen=True)
class PointSet:
    """Immutable bundle of sample coordinates with column labels."""

    coords: np.ndarray
    columns: tuple

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        object.__setattr__(self, "coords", coords)
        if coords.ndim != 2:
            raise ConfigurationError("PointSet coordinates must be 2-d")
        if len(self.columns) != coords.shape[1]:
            raise ConfigurationError(
                f"{len(self.columns)} column labels for "
                f"{coords.shape[1]} coordinate dimensions"
            )

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def dim(self):
        return self.coords.shape[1]

    def to_csv(self, path):
        header = ",".join(self.columns)
        np.savetxt(path, self.coords, delimiter=",", header=header,
                   comments="", fmt="%.16e")


def _check_bounds(bounds):
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    if not bounds:
        raise ConfigurationError("bounds must define at least one dimension")
    for lo, hi in bounds:
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
            raise ConfigurationError(f"degenerate bounds ({lo}, {hi})")
    return bounds


def _default_columns(d):
    if d <= 3:
        return ("x", "y", "z")[:d]
    return tuple(f"x{i}" for i in range(d))


def _rejection_fill(draw, n, exclude):
    """Accumulate draws in order, dropping excluded rows, until n remain."""
    if exclude is None:
        return draw(n)
    parts = []
    have = 0
    attempts = 0
    while have < n:
        chunk = draw(max(n - have, 16))
        keep = chunk[~np.asarray(exclude(chunk), dtype=bool)]
        parts.append(keep)
        have += len(keep)
        attempts += 1
        if attempts > 1000:
            raise ConfigurationError(
                "exclusion predicate rejects nearly all samples"
            )
    return np.concatenate(parts)[:n]


def uniform_box(bounds, n, seed, exclude=None, columns=None):
    """``n`` i.i.d. uniform points in the axis-aligned box ``bounds``."""
    bounds = _check_bounds(bounds)
    if n < 1:
        raise ConfigurationError("need at least one sample")
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def draw(k):
        return rng.uniform(lo, hi, size=(k, len(bounds)))

    coords = _rejection_fill(draw, n, exclude)
    return PointSet(coords, tuple(columns or _default_columns(len(bounds))))


def sobol_box(bounds, n, exclude=None, columns=None):
    """First ``n`` points of the unscrambled Sobol sequence, box-scaled.

    The leading all-zeros point of the raw sequence is skipped.
    """
    bounds = _check_bounds(bounds)
    if n < 1:
        raise ConfigurationError("need at least one sample")
    engine = qmc.Sobol(d=len(bounds), scramble=False)
    engine.fast_forward(1)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def draw(k):
        with warnings.catch_warnings():
            # balance warning about non power-of-two draws is irrelevant here
            warnings.simplefilter("ignore", UserWarning)
            u = engine.random(k)
        return lo + u * (hi - lo)

    coords = _rejection_fill(draw, n, exclude)
    return PointSet(coords, tuple(columns or _default_columns(len(bounds))))


def boundary_trace(bounds, axis, value, n, seed, columns=None):
    """``n`` points on the face ``x[axis] == value`` of the box.

    The remaining coordinates are sampled uniformly; ``value`` must lie
    inside (or on) the box along ``axis``.
    """
    bounds = _check_bounds(bounds)
    d = len(bounds)
    if not 0 <= axis < d:
        raise ConfigurationError(f"axis {axis} out of range for {d}-d box")
    lo, hi = bounds[axis]
    value = float(value)
    if not lo <= value <= hi:
        raise ConfigurationError(
            f"face value {value} outside bounds ({lo}, {hi}) on axis {axis}"
        )
    if n < 1:
        raise ConfigurationError("need at least one sample")
    rng = np.random.default_rng(seed)
    coords = np.empty((n, d), dtype=np.float64)
    for j, (blo, bhi) in enumerate(bounds):
        coords[:, j] = value if j == axis else rng.uniform(blo, bhi, size=n)
    return PointSet(coords, tuple(columns or _default_columns(d)))


def periodic_faces(bounds, axis, n, seed, columns=None):
    """Matched pairs on the two opposite faces normal to ``axis``.

    Returns a single :class:`PointSet` of ``2n`` points: rows ``i`` and
    ``n + i`` share every coordinate except ``x[axis]``, which takes the
    low and high bound respectively.
    """
    bounds = _check_bounds(bounds)
    low = boundary_trace(bounds, axis, bounds[axis][0], n, seed, columns)
    high = low.coords.copy()
    high[:, axis] = bounds[axis][1]
    return PointSet(np.vstack([low.coords, high]), low.columns)


def fixed_points(coords, columns=None):
    """Wrap explicit coordinates (anchor points, sensor lines)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    return PointSet(coords, tuple(columns or _default_columns(coords.shape[1])))


def resample_seed(base_seed, epoch):
    """Derive the per-epoch resampling seed from (base seed, epoch)."""
    return np.random.SeedSequence([int(base_seed), int(epoch)])
