"""Covariance functions, matrix assembly on grids and PSD validation.

Built-in variants::

    brownian                   c(t, s) = min(t, s)
    ornstein_uhlenbeck(l)      c(t, s) = exp(-|t - s| / l)
    squared_exponential(l)     c(t, s) = exp(-(t - s)^2 / (2 l^2))
    rank_one(profile)          c(t, s) = f(t) f(s)
    constant(level)            c(t, s) = level
    bumps(N, ratio, decay)     sum_n decay^n u_n u_n^T  (see ``bumps_kernel``)
    custom_matrix              user supplied matrix

The bumps family is a finite stand-in for a covariance with an unbounded
continuity ratio: its ratio grows like ``ratio ** N``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConditioningError
from .grid import Grid, SubsetMask

PSD_TOLERANCE = 1e-10

PROFILES = {
    "linear": lambda t: t,
    "quadratic": lambda t: t**2,
    "sine": lambda t: np.sin(np.pi * t),
    "cosine": lambda t: np.cos(np.pi * t),
    "exp": np.exp,
}

VARIANTS = (
    "brownian",
    "ornstein_uhlenbeck",
    "squared_exponential",
    "rank_one",
    "constant",
    "bumps",
    "custom_matrix",
)
STATIONARY = ("ornstein_uhlenbeck", "squared_exponential", "constant")


@dataclass(frozen=True)
class KernelSpec:
    """A covariance function together with its parameters.

    Only the parameters relevant to ``variant`` are read; the rest keep their
    defaults.
    """

    variant: str
    length_scale: float = 1.0
    profile: str = "linear"
    level: float = 1.0
    n_bumps: int = 1
    height_ratio: float = 2.0
    decay: float = 0.5
    matrix: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        v = self.variant
        if v not in VARIANTS:
            raise ConditioningError("invalid-kernel", f"kernel.variant: unknown kernel {v!r}; expected one of {VARIANTS}")
        if v in ("ornstein_uhlenbeck", "squared_exponential") and not self.length_scale > 0:
            raise ConditioningError("invalid-kernel", "kernel.length_scale must be positive")
        if v == "rank_one" and self.profile not in PROFILES:
            raise ConditioningError(
                "invalid-kernel", f"kernel.profile: unknown profile {self.profile!r}; expected one of {tuple(PROFILES)}"
            )
        if v == "constant" and not self.level >= 0:
            raise ConditioningError("invalid-kernel", "kernel.level must be nonnegative")
        if v == "bumps":
            if int(self.n_bumps) != self.n_bumps or self.n_bumps < 1:
                raise ConditioningError("grid-too-coarse", "kernel.n_bumps must be a positive integer")
            if not self.height_ratio > 1:
                raise ConditioningError("invalid-kernel", "kernel.height_ratio must exceed 1")
            if not 0 < self.decay < 1:
                raise ConditioningError("invalid-kernel", "kernel.decay must lie in (0, 1)")
        if v == "custom_matrix":
            if self.matrix is None:
                raise ConditioningError("invalid-kernel", "kernel.matrix is required for custom_matrix")
            m = np.array(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ConditioningError("invalid-kernel", "kernel.matrix must be square")
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        """Build from a config mapping; unknown keys are rejected by name."""
        d = dict(d)
        if "variant" not in d:
            raise ConditioningError("invalid-kernel", "kernel.variant is missing")
        allowed = {"variant", "length_scale", "profile", "level", "n_bumps", "height_ratio", "decay", "matrix", "matrix_file"}
        extra = set(d) - allowed
        if extra:
            raise ConditioningError("invalid-kernel", f"kernel: unknown field(s) {sorted(extra)}")
        if "matrix_file" in d:
            d["matrix"] = load_matrix_csv(d.pop("matrix_file"))
        return cls(**d)

    def to_dict(self) -> dict:
        out = {"variant": self.variant}
        if self.variant in ("ornstein_uhlenbeck", "squared_exponential"):
            out["length_scale"] = self.length_scale
        elif self.variant == "rank_one":
            out["profile"] = self.profile
        elif self.variant == "constant":
            out["level"] = self.level
        elif self.variant == "bumps":
            out.update(n_bumps=self.n_bumps, height_ratio=self.height_ratio, decay=self.decay)
        return out

    @property
    def stationary(self) -> bool:
        return self.variant in STATIONARY

    def __call__(self, t, s):
        """Evaluate ``c(t, s)`` with numpy broadcasting (closed-form variants only)."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        v = self.variant
        if v == "brownian":
            return np.minimum(t, s)
        if v == "ornstein_uhlenbeck":
            return np.exp(-np.abs(t - s) / self.length_scale)
        if v == "squared_exponential":
            return np.exp(-((t - s) ** 2) / (2.0 * self.length_scale**2))
        if v == "rank_one":
            f = PROFILES[self.profile]
            return f(t) * f(s)
        if v == "constant":
            return np.full(np.broadcast(t, s).shape, float(self.level))
        raise ConditioningError("invalid-kernel", f"{v} has no closed-form covariance function")


@dataclass(frozen=True)
class CovarianceMatrix:
    """Kernel matrix ``C[i, j] = c(t_i, t_j)`` on a grid."""

    entries: np.ndarray
    psd_tolerance: float = PSD_TOLERANCE

    def __post_init__(self):
        C = np.array(self.entries, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ConditioningError("size-mismatch", "covariance matrix must be square")
        C.setflags(write=False)
        object.__setattr__(self, "entries", C)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    symmetric: bool
    min_eigenvalue: float
    max_eigenvalue: float
    schwarz_violation: float
    psd_tolerance: float

    def to_dict(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in self.__dict__.items()}


def as_matrix(C) -> np.ndarray:
    """Plain float array view of a ``CovarianceMatrix`` or array-like."""
    if isinstance(C, CovarianceMatrix):
        return C.entries
    return np.asarray(C, dtype=float)


def assemble(spec: KernelSpec, grid: Grid, mask: Optional[SubsetMask] = None,
             psd_tolerance: float = PSD_TOLERANCE) -> CovarianceMatrix:
    """Kernel matrix of ``spec`` on ``grid``.

    ``mask`` is only used by the bumps variant, whose bumps are placed
    relative to the observed subset.
    """
    if spec.variant == "custom_matrix":
        if spec.matrix.shape[0] != grid.size:
            raise ConditioningError(
                "size-mismatch", f"custom matrix is {spec.matrix.shape[0]}x{spec.matrix.shape[0]}, grid has {grid.size} points"
            )
        return CovarianceMatrix(spec.matrix, psd_tolerance)
    if spec.variant == "bumps":
        if mask is None:
            raise ConditioningError("invalid-kernel", "bumps kernel needs the observation mask")
        return bumps_kernel(spec.n_bumps, spec.height_ratio, spec.decay, grid, mask, psd_tolerance)
    t = grid.points
    C = spec(t[:, None], t[None, :])
    # exact symmetry regardless of rounding inside the kernel formula
    C = np.triu(C) + np.triu(C, 1).T
    return CovarianceMatrix(C, psd_tolerance)


def validate(C, psd_tolerance: Optional[float] = None) -> ValidationReport:
    """PSD and Schwarz checks. Never raises on a bad matrix; reports instead."""
    if psd_tolerance is None:
        psd_tolerance = C.psd_tolerance if isinstance(C, CovarianceMatrix) else PSD_TOLERANCE
    A = as_matrix(C)
    symmetric = bool(A.ndim == 2 and A.shape[0] == A.shape[1] and np.array_equal(A, A.T))
    if not (A.ndim == 2 and A.shape[0] == A.shape[1]) or not np.all(np.isfinite(A)):
        return ValidationReport(False, False, float("nan"), float("nan"), float("inf"), psd_tolerance)
    lam = np.linalg.eigvalsh((A + A.T) / 2)
    lam_min, lam_max = float(lam[0]), float(lam[-1])
    d = np.diag(A)
    schwarz = float(np.max(A**2 - np.outer(d, d))) if A.size else 0.0
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    passed = (
        symmetric
        and lam_min >= -psd_tolerance * max(1.0, lam_max)
        and schwarz <= psd_tolerance * scale**2
    )
    return ValidationReport(bool(passed), symmetric, lam_min, lam_max, max(schwarz, 0.0), psd_tolerance)


def _hat_centres(candidates: np.ndarray, count: int) -> list:
    """Greedy left-to-right choice of ``count`` hat centres.

    A centre ``p`` needs ``p - 1, p, p + 1`` all in ``candidates``; hats are
    kept at least one node apart so their supports are disjoint.
    """
    pool = set(int(i) for i in candidates)
    centres = []
    last = -10
    for p in sorted(pool):
        if len(centres) == count:
            break
        if p - 1 in pool and p + 1 in pool and p - 1 > last + 1:
            centres.append(p)
            last = p + 1
    return centres


def bump_layout(n_bumps: int, grid: Grid, mask: SubsetMask):
    """Centres ``(s_n, t_n)`` of the observed and unobserved hats, n = 1..N."""
    if int(n_bumps) != n_bumps or n_bumps < 1:
        raise ConditioningError("grid-too-coarse", "n_bumps must be a positive integer")
    if mask.parent_size != grid.size:
        raise ConditioningError("size-mismatch", "mask does not belong to this grid")
    inside = _hat_centres(mask.indices, n_bumps)
    outside = _hat_centres(mask.complement, n_bumps)
    if len(inside) < n_bumps or len(outside) < n_bumps:
        raise ConditioningError(
            "grid-too-coarse",
            f"room for {len(inside)} bumps in S and {len(outside)} outside, need {n_bumps} each",
        )
    return np.array(inside), np.array(outside)


def bumps_kernel(n_bumps: int, height_ratio: float, decay: float, grid: Grid, mask: SubsetMask,
                 psd_tolerance: float = PSD_TOLERANCE) -> CovarianceMatrix:
    """Rank-``n_bumps`` kernel whose continuity ratio is ``height_ratio ** n_bumps``.

    ``C = sum_n decay^n u_n u_n^T`` where ``u_n`` is the sum of two
    piecewise-linear hats: one of height ``height_ratio ** -n`` centred at a
    node of S and one of height 1 centred at a node outside S. Each hat takes
    the values ``h/2, h, h/2`` on three consecutive nodes, and all hats have
    disjoint supports.
    """
    if not height_ratio > 1:
        raise ConditioningError("invalid-kernel", "height_ratio must exceed 1")
    if not 0 < decay < 1:
        raise ConditioningError("invalid-kernel", "decay must lie in (0, 1)")
    s_centres, t_centres = bump_layout(n_bumps, grid, mask)
    C = np.zeros((grid.size, grid.size))
    profile = np.array([0.5, 1.0, 0.5])
    for n in range(1, n_bumps + 1):
        u = np.zeros(grid.size)
        s, t = s_centres[n - 1], t_centres[n - 1]
        u[s - 1:s + 2] = height_ratio ** (-n) * profile
        u[t - 1:t + 2] = profile
        C += decay**n * np.outer(u, u)
    return CovarianceMatrix(C, psd_tolerance)


def load_matrix_csv(path) -> np.ndarray:
    """Read a square comma-separated matrix, one row per line."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    A = np.array(rows, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConditioningError("invalid-kernel", f"{path}: matrix must be square")
    return A
