"""Sampling of prior and conditional fields, and statistical checks.

Random numbers come from ``numpy.random.SeedSequence`` streams spawned per
block of ``BLOCK`` paths, so a batch is reproducible bit-for-bit from its
seed whether blocks are generated serially or in parallel.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import CUTOFF, ConditionalLaw, HilbertFactor, compute_m_delta, condition, factorize, observation_range
from .errors import ConditioningError
from .grid import Grid, SubsetMask, restrict
from .kernels import as_matrix, bump_layout, bumps_kernel

BLOCK = 4096
Z_PASS = 3.0


@dataclass
class SampleBatch:
    paths: np.ndarray
    seed: int
    law_tag: str

    @property
    def n(self) -> int:
        return self.paths.shape[0]


@dataclass
class StatReport:
    name: str
    estimate: float
    reference: float
    stderr: float
    z_score: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "estimate": float(self.estimate),
            "reference": float(self.reference),
            "stderr": float(self.stderr),
            "z_score": float(self.z_score),
            "pass": bool(self.passed),
            **({"note": self.note} if self.note else {}),
        }


def standard_normals(seed: int, n: int, dim: int) -> np.ndarray:
    """``n x dim`` standard normals, generated in independent per-block streams."""
    out = np.empty((n, dim))
    n_blocks = -(-n // BLOCK)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    for b, child in enumerate(children):
        lo, hi = b * BLOCK, min(n, (b + 1) * BLOCK)
        out[lo:hi] = np.random.default_rng(child).standard_normal((hi - lo, dim))
    return out


def _stat(name, estimate, reference, stderr, note="", allowance=0.0) -> StatReport:
    diff = estimate - reference
    if stderr > 0:
        z = diff / stderr
    else:
        z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(reference)) else np.copysign(np.inf, diff)
    passed = abs(diff) <= Z_PASS * stderr + allowance if stderr > 0 else abs(z) <= Z_PASS
    return StatReport(name, float(estimate), float(reference), float(stderr), float(z), bool(passed), note)


def sample_prior(factor: HilbertFactor, n: int, seed: int) -> SampleBatch:
    """Paths ``L z`` with ``z`` standard normal in the factor coordinates."""
    L = factor.iota
    z = standard_normals(seed, int(n), factor.rank)
    return SampleBatch(z @ L.T if factor.rank else np.zeros((int(n), L.shape[0])), seed, "prior")


def law_tag(law: ConditionalLaw) -> str:
    h = hashlib.sha1(np.ascontiguousarray(law.y_projected).tobytes()).hexdigest()[:12]
    return f"conditional({h})"


def sample_conditional(law: ConditionalLaw, n: int, seed: int, cov_scale: float = 1.0) -> SampleBatch:
    """Paths ``mean + L (I - pi) z``.

    ``cov_scale`` multiplies the conditional covariance; it exists for negative
    controls and is 1 in normal use.
    """
    B = law.cov_factor() * np.sqrt(cov_scale)
    z = standard_normals(seed, int(n), B.shape[1])
    return SampleBatch(law.mean[None, :] + z @ B.T, seed, law_tag(law))


def support_residual(paths: np.ndarray, C, cutoff: float = CUTOFF, centre=None) -> np.ndarray:
    """Per-path distance (2-norm) from ``centre + range(C)``."""
    A = as_matrix(C)
    lam, V = np.linalg.eigh((A + A.T) / 2)
    keep = lam > cutoff * max(lam[-1], 0.0) if lam[-1] > 0 else np.zeros_like(lam, dtype=bool)
    Vk = V[:, keep]
    X = np.atleast_2d(paths) - (0.0 if centre is None else centre)
    return np.linalg.norm(X - (X @ Vk) @ Vk.T, axis=1)


# ----------------------------------------------------------------------------
# functional library: each entry maps an (n, |T|) array of paths to n reals

def constant(value: float = 1.0) -> Callable:
    f = lambda X: np.full(X.shape[0], float(value))
    f.__name__ = f"constant({value})"
    return f


def coordinate(i: int) -> Callable:
    f = lambda X: X[:, i]
    f.__name__ = f"x[{i}]"
    return f


def squared_coordinate(i: int) -> Callable:
    f = lambda X: X[:, i] ** 2
    f.__name__ = f"x[{i}]^2"
    return f


def tanh_linear(weights) -> Callable:
    w = np.asarray(weights, dtype=float)
    f = lambda X: np.tanh(X @ w)
    f.__name__ = "tanh(w.x)"
    return f


def clipped_sup(cap: float = 1.0) -> Callable:
    f = lambda X: np.minimum(np.max(np.abs(X), axis=1), cap)
    f.__name__ = f"min(|x|_inf, {cap})"
    return f


def _name(f) -> str:
    return getattr(f, "__name__", repr(f))


def check_disintegration(C, mask: SubsetMask, functionals: Sequence[Callable], n_outer: int, n_inner: int,
                         seed: int, cutoff: float = CUTOFF, cov_scale: float = 1.0) -> list:
    """Compare ``E f`` under the prior with the nested conditional average.

    The direct side uses ``n_outer * n_inner`` prior paths. The nested side
    draws ``n_outer`` prior paths, restricts them to S, and averages ``f``
    over ``n_inner`` conditional paths given each restriction. Its standard
    error comes from the spread of the ``n_outer`` inner means.
    """
    A = as_matrix(C)
    n_outer, n_inner = int(n_outer), int(n_inner)
    factor = factorize(A, mask, cutoff)
    ss = np.random.SeedSequence(seed)
    s_direct, s_outer, s_inner = (int(c.generate_state(1)[0]) for c in ss.spawn(3))

    direct = sample_prior(factor, n_outer * n_inner, s_direct).paths
    outer = sample_prior(factor, n_outer, s_outer).paths
    Y = restrict(outer, mask)

    pinv, Vk = observation_range(A, mask, cutoff)
    Y = (Y @ Vk) @ Vk.T
    means = Y @ (A[:, mask.indices] @ pinv).T
    B = factor.iota @ factor.projection_perp * np.sqrt(cov_scale)
    Z = standard_normals(s_inner, n_outer * n_inner, B.shape[1])
    nested = np.repeat(means, n_inner, axis=0) + Z @ B.T

    reports = []
    for f in functionals:
        fd = f(direct)
        fn = f(nested).reshape(n_outer, n_inner)
        inner_means = fn.mean(axis=1)
        se_d = fd.std(ddof=1) / np.sqrt(fd.size) if fd.size > 1 else 0.0
        note = ""
        if n_outer > 1:
            se_n = inner_means.std(ddof=1) / np.sqrt(n_outer)
        else:
            se_n = fn.std(ddof=1) / np.sqrt(fn.size) if fn.size > 1 else 0.0
            note = "stderr-unreliable: n_outer = 1"
        reports.append(_stat(_name(f), inner_means.mean(), fd.mean(), float(np.hypot(se_d, se_n)), note))
    return reports


def total_variance_gap(law: ConditionalLaw, C) -> float:
    """max_t |C[t,t] - Chat[t,t] - (m C_SS m^T)[t,t]| (exact, no sampling)."""
    A = as_matrix(C)
    S = law.mask.indices
    explained = law.mean_map @ A[np.ix_(S, S)] @ law.mean_map.T
    return float(np.max(np.abs(np.diag(A) - np.diag(law.cond_cov) - np.diag(explained))))


@dataclass
class ContinuityReport:
    scales: list
    ratios: list
    bound: float
    direction_norm: float
    cov_identical: bool
    tol: float

    @property
    def passed(self) -> bool:
        return self.cov_identical and all(r <= self.bound + self.tol for r in self.ratios)

    def to_dict(self) -> dict:
        return {
            "scales": [float(s) for s in self.scales],
            "ratios": [float(r) for r in self.ratios],
            "bound": float(self.bound),
            "direction_norm": float(self.direction_norm),
            "cov_identical": bool(self.cov_identical),
            "pass": self.passed,
        }


def check_weak_continuity(C, mask: SubsetMask, y_target, perturbation_scales, seed: int,
                          tol: float = 1e-8, y_tol: float = 1e-6, cutoff: float = CUTOFF) -> ContinuityReport:
    """Mean convergence at fixed conditional covariance along ``y + eps d``.

    ``d`` is a random element of the observation range. For Gaussian laws
    sharing one covariance, sup-norm convergence of the means is the same as
    weak convergence of the laws.
    """
    A = as_matrix(C)
    base = condition(A, mask, y_target, tol=y_tol, cutoff=cutoff, seed=seed)
    rng = np.random.default_rng(seed)
    d = A[np.ix_(mask.indices, mask.indices)] @ rng.standard_normal(mask.size)
    _, Vk = observation_range(A, mask, cutoff)
    d = Vk @ (Vk.T @ d)
    dn = float(np.max(np.abs(d)))
    bound = base.m_report.m_opnorm_rowsum
    if bound is None:
        bound = float(np.max(np.sum(np.abs(base.mean_map), axis=1)))
    ratios, same = [], True
    for eps in perturbation_scales:
        law = condition(A, mask, base.y_projected + eps * d, tol=y_tol, cutoff=cutoff, seed=seed)
        delta = float(np.max(np.abs(law.mean - base.mean)))
        ratios.append(delta / (eps * dn) if eps * dn > 0 else 0.0)
        same &= law.cond_cov.tobytes() == base.cond_cov.tobytes()
    return ContinuityReport(list(perturbation_scales), ratios, bound, dn, bool(same), tol)


def rejection_oracle(C, mask: SubsetMask, y, delta: float, probe_indices, n: int, seed: int,
                     t_indices=None, cutoff: float = CUTOFF, min_accept: int = 100) -> list:
    """Condition by rejection on a small sub-mask and compare with the core mean.

    Prior paths are kept when they stay within ``delta`` of ``y`` on every
    probe node. The empirical mean of the kept paths at each ``t_indices``
    node is compared with the core's conditional mean for the sub-mask
    problem; an extra ``delta`` is allowed for the band-width bias.
    """
    A = as_matrix(C)
    probe = np.asarray(probe_indices, dtype=int)
    if probe.size == 0 or probe.size > 5:
        raise ConditioningError("invalid-probe", "probe sub-mask must have 1 to 5 nodes")
    pos = np.searchsorted(mask.indices, probe)
    if np.any(pos >= mask.size) or np.any(mask.indices[np.minimum(pos, mask.size - 1)] != probe):
        raise ConditioningError("invalid-probe", "probe nodes must belong to the observed subset")
    y = np.asarray(y, dtype=float).ravel()
    y_probe = y[pos] if y.size == mask.size else y
    if y_probe.size != probe.size:
        raise ConditioningError("length-mismatch", "observation must cover S or the probe nodes")
    if t_indices is None:
        t_indices = [mask.parent_size - 1]
    t_indices = np.asarray(t_indices, dtype=int)

    sub = SubsetMask(np.sort(probe), mask.parent_size)
    order = np.argsort(probe)
    law = condition(A, sub, y_probe[order], cutoff=cutoff)

    factor = factorize(A, sub, cutoff)
    L = factor.iota
    children = np.random.SeedSequence(seed).spawn(-(-int(n) // BLOCK) or 1)
    kept_sum = np.zeros(t_indices.size)
    kept_sq = np.zeros(t_indices.size)
    kept = 0
    done = 0
    for child in children:
        m = min(BLOCK, int(n) - done)
        if m <= 0:
            break
        z = np.random.default_rng(child).standard_normal((m, factor.rank))
        X = z @ L.T
        done += m
        ok = np.all(np.abs(X[:, probe] - y_probe) < delta, axis=1)
        Xt = X[ok][:, t_indices]
        kept += int(ok.sum())
        kept_sum += Xt.sum(axis=0)
        kept_sq += (Xt**2).sum(axis=0)
    if kept < min_accept:
        raise ConditioningError("too-few-acceptances", f"{kept} of {n} paths accepted (need {min_accept})")
    mean = kept_sum / kept
    var = kept_sq / kept - mean**2
    se = np.sqrt(np.clip(var, 0.0, None) * kept / max(kept - 1, 1) / kept)
    return [
        _stat(f"m(y,t[{t}])", mean[j], law.mean[t], se[j], note=f"accepted {kept}/{n}", allowance=float(delta))
        for j, t in enumerate(t_indices)
    ]


@dataclass
class DivergenceRow:
    n_bumps: int
    m_delta: float
    y_norm: float
    mean_norm: float
    expected_mean_norm: float

    def to_dict(self) -> dict:
        return {k: (int(v) if k == "n_bumps" else float(v)) for k, v in self.__dict__.items()}


def divergence_demo(height_ratio: float, n_bumps_range, grid: Grid, mask: SubsetMask, seed: int = 0,
                    decay: float = 0.5, cutoff: float = CUTOFF) -> list:
    """Growth of the continuity ratio along the bumps family.

    For each N the observation ``y_N = (1/N) C[S, s_N] / ||C[S, s_N]||`` with
    ``s_N`` the observed peak of the N-th bump tends to zero, while the
    conditional mean ``m(y_N) = (1/N) C[:, s_N] / ||C[S, s_N]||`` keeps
    sup-norm ``height_ratio^N / N``.
    """
    rows = []
    for N in n_bumps_range:
        C = bumps_kernel(int(N), height_ratio, decay, grid, mask).entries
        s_centres, _ = bump_layout(int(N), grid, mask)
        sN = int(s_centres[N - 1])
        col = C[mask.indices, sN]
        y = col / (N * np.max(np.abs(col)))
        law = condition(C, mask, y, cutoff=cutoff, seed=seed)
        expected = np.max(np.abs(C[:, sN])) / (N * np.max(np.abs(col)))
        rows.append(
            DivergenceRow(
                int(N),
                compute_m_delta(C, mask).m_delta,
                float(np.max(np.abs(y))),
                float(np.max(np.abs(law.mean))),
                float(expected),
            )
        )
    return rows
