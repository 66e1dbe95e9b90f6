"""Discretized parameter set, observation subset and the restriction map."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConditioningError


@dataclass(frozen=True)
class Grid:
    """Strictly increasing 1-D list of parameter values."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size < 2:
            raise ConditioningError("invalid-count", "a grid needs at least 2 points")
        if not np.all(np.isfinite(pts)) or np.any(np.diff(pts) <= 0):
            raise ConditioningError("invalid-range", "grid points must be finite and strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return int(self.points.size)

    def __len__(self) -> int:
        return self.size

    def index_of(self, t: float, atol: float = 1e-12) -> int:
        """Index of the grid node equal to ``t`` (within ``atol`` times the spacing scale)."""
        scale = max(1.0, float(np.max(np.abs(self.points))))
        i = int(np.argmin(np.abs(self.points - t)))
        if abs(self.points[i] - t) > atol * scale:
            raise ConditioningError("off-grid", f"{t!r} is not a grid node")
        return i


@dataclass(frozen=True)
class SubsetMask:
    """Sorted grid indices making up the observed subset ``S``."""

    indices: np.ndarray
    parent_size: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int).ravel()
        if idx.size == 0:
            raise ConditioningError("empty-subset", "the observed subset has no grid points")
        if np.any(np.diff(idx) <= 0):
            raise ConditioningError("invalid-mask", "mask indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.parent_size:
            raise ConditioningError("invalid-mask", f"mask indices must lie in [0, {self.parent_size})")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "parent_size", int(self.parent_size))

    @property
    def size(self) -> int:
        return int(self.indices.size)

    def __len__(self) -> int:
        return self.size

    @property
    def complement(self) -> np.ndarray:
        keep = np.ones(self.parent_size, dtype=bool)
        keep[self.indices] = False
        return np.flatnonzero(keep)

    def as_bool(self) -> np.ndarray:
        out = np.zeros(self.parent_size, dtype=bool)
        out[self.indices] = True
        return out


@dataclass(frozen=True)
class Restriction:
    """The restriction map as a callable coordinate selection."""

    mask: SubsetMask

    def __call__(self, x):
        return restrict(x, self.mask)

    def matrix(self) -> np.ndarray:
        """The |S| x |T| 0/1 selection matrix."""
        E = np.zeros((self.mask.size, self.mask.parent_size))
        E[np.arange(self.mask.size), self.mask.indices] = 1.0
        return E


def build_grid(t_min: float, t_max: float, n: int) -> Grid:
    """``n`` equally spaced points on ``[t_min, t_max]``, endpoints included."""
    if int(n) != n or n < 2:
        raise ConditioningError("invalid-count", f"n must be an integer >= 2, got {n!r}")
    if not (np.isfinite(t_min) and np.isfinite(t_max)) or not t_min < t_max:
        raise ConditioningError("invalid-range", f"need t_min < t_max, got [{t_min}, {t_max}]")
    return Grid(np.linspace(float(t_min), float(t_max), int(n)))


def mask_from_intervals(grid: Grid, intervals: Iterable[Sequence[float]], atol: float = 1e-12) -> SubsetMask:
    """Grid nodes lying in the union of the closed ``intervals``.

    Endpoints are matched with a small relative slack so that intervals typed
    in decimal (``0.5``) still pick up nodes produced by ``linspace``.
    """
    intervals = [tuple(iv) for iv in intervals]
    if not intervals:
        raise ConditioningError("empty-subset", "no intervals given")
    pts = grid.points
    slack = atol * max(1.0, float(np.max(np.abs(pts))))
    hit = np.zeros(grid.size, dtype=bool)
    for iv in intervals:
        if len(iv) != 2:
            raise ConditioningError("invalid-interval", f"interval {iv!r} is not a [lo, hi] pair")
        lo, hi = float(iv[0]), float(iv[1])
        if lo > hi:
            raise ConditioningError("invalid-interval", f"interval [{lo}, {hi}] has lo > hi")
        hit |= (pts >= lo - slack) & (pts <= hi + slack)
    if not hit.any():
        raise ConditioningError("empty-subset", f"no grid point lies in {intervals}")
    return SubsetMask(np.flatnonzero(hit), grid.size)


def restrict(x, mask: SubsetMask) -> np.ndarray:
    """Select the coordinates of ``x`` (last axis) that belong to ``mask``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != mask.parent_size:
        raise ConditioningError(
            "length-mismatch", f"vector has length {x.shape[-1]}, mask expects {mask.parent_size}"
        )
    return x[..., mask.indices]
