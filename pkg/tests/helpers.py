"""Random instance generators shared by the property tests."""

import numpy as np

from condfield import KernelSpec, SubsetMask, assemble, build_grid, bumps_kernel, mask_from_intervals, validate


def random_subset(rng, n, max_size=None):
    k = int(rng.integers(1, (max_size or n) + 1))
    return SubsetMask(np.sort(rng.choice(n, size=k, replace=False)), n)


def random_kernel(rng, max_n=12):
    """A validated covariance on at most ``max_n`` nodes plus a random subset.

    Mixes Gram matrices of random rank (so C_SS is often singular) with
    closed-form kernels on random grids. Squared-exponential kernels are left
    out: at these sizes they are numerically rank-deficient in a way that
    depends on the rank rule, which the two-route comparisons are not about.
    """
    n = int(rng.integers(3, max_n + 1))
    kind = rng.integers(0, 6)
    if kind <= 1:
        k = int(rng.integers(1, n + 1))
        A = rng.standard_normal((n, k)) / np.sqrt(k)
        C = A @ A.T
        C = np.triu(C) + np.triu(C, 1).T
    else:
        lo = float(rng.uniform(0.0, 0.5))
        grid = build_grid(lo, lo + float(rng.uniform(0.5, 2.0)), n)
        spec = {
            2: KernelSpec("brownian"),
            3: KernelSpec("ornstein_uhlenbeck", length_scale=float(rng.uniform(0.2, 3.0))),
            4: KernelSpec("rank_one", profile=str(rng.choice(["linear", "sine", "exp", "quadratic"]))),
            5: KernelSpec("constant", level=float(rng.uniform(0.1, 2.0))),
        }[int(kind)]
        C = assemble(spec, grid).entries
    mask = random_subset(rng, n)
    assert validate(C).passed
    return np.array(C), mask


def y_in_range(rng, C, mask):
    S = mask.indices
    return C[np.ix_(S, S)] @ rng.standard_normal(S.size)


def full_rank_instance(rng, max_s=3, max_n=12):
    """Random kernel whose observed block is comfortably invertible."""
    while True:
        n = int(rng.integers(max_s + 1, max_n + 1))
        k = int(rng.integers(max_s, n + 1))
        A = rng.standard_normal((n, k)) / np.sqrt(k)
        C = A @ A.T
        C = np.triu(C) + np.triu(C, 1).T
        mask = random_subset(rng, n, max_s)
        S = mask.indices
        if np.linalg.cond(C[np.ix_(S, S)]) < 1e6:
            return C, mask


def brownian_setup(n=101, hi=0.5):
    grid = build_grid(0.0, 1.0, n)
    mask = mask_from_intervals(grid, [[0.0, hi]])
    return grid, mask, assemble(KernelSpec("brownian"), grid)


def bumps_setup(n_bumps, ratio=2.0, n=61):
    grid = build_grid(0.0, 1.0, n)
    mask = mask_from_intervals(grid, [[0.0, 0.5]])
    return grid, mask, bumps_kernel(n_bumps, ratio, 0.5, grid, mask)
