"""Continuity ratio, Hilbert factorization and the conditional law.

Notation on a grid with |T| nodes and observed subset S:

* ``C_SS = C[S, S]``, ``C_TS = C[:, S]``.
* ``L = Phi_r sqrt(Lambda_r)`` so that ``C = L L^T``. ``L`` plays the role of
  the embedding of the Cameron-Martin coordinates into path space and
  ``L^T`` of its adjoint.
* ``H_Y`` is the column space of ``L[S, :]^T`` inside the r-dimensional
  factor coordinates, ``pi`` the orthogonal projection onto it.

The conditional mean map is computed as ``C_TS C_SS^+`` and, independently,
as ``L pi L[S, :]^+``; the conditional covariance as ``L (I - pi) L^T`` and as
the Schur complement ``C - C_TS C_SS^+ C_ST``. Both pairs must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConditioningError
from .grid import SubsetMask, restrict
from .kernels import as_matrix, validate

CUTOFF = 1e-10
DEGENERATE_TOL = 1e-12
NOISE_FLOOR = 1e-8


@dataclass
class MRatioReport:
    m_delta: float
    m_delta_witness: int
    skipped_rows: list
    m_opnorm_lower: Optional[float] = None
    m_opnorm_rowsum: Optional[float] = None
    m_opnorm_witness: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def bound(self) -> float:
        """Best available value of the operator norm (row sum if exact)."""
        if self.m_opnorm_rowsum is not None:
            return self.m_opnorm_rowsum
        if self.m_opnorm_lower is not None:
            return self.m_opnorm_lower
        return self.m_delta

    def to_dict(self) -> dict:
        return {
            "m_delta": float(self.m_delta),
            "m_opnorm_lower": None if self.m_opnorm_lower is None else float(self.m_opnorm_lower),
            "m_opnorm_rowsum": None if self.m_opnorm_rowsum is None else float(self.m_opnorm_rowsum),
            "witness": int(self.m_delta_witness),
            "skipped_rows": [int(i) for i in self.skipped_rows],
        }


@dataclass
class HilbertFactor:
    eigenvectors: np.ndarray
    eigenvalues: np.ndarray
    rank: int
    projection_HY: np.ndarray
    mask: SubsetMask
    cutoff: float = CUTOFF
    iota_s_pinv: np.ndarray = field(default=None, repr=False)

    @property
    def iota(self) -> np.ndarray:
        """|T| x r matrix ``Phi_r sqrt(Lambda_r)``."""
        r = self.rank
        return self.eigenvectors[:, :r] * np.sqrt(self.eigenvalues[:r])

    @property
    def projection_perp(self) -> np.ndarray:
        return np.eye(self.rank) - self.projection_HY

    def reconstruct(self) -> np.ndarray:
        L = self.iota
        return L @ L.T


@dataclass
class ConditionalLaw:
    mean_map: np.ndarray
    mean: np.ndarray
    cond_cov: np.ndarray
    y_projected: np.ndarray
    projection_residual: float
    m_report: MRatioReport
    mask: SubsetMask
    factor: HilbertFactor = field(repr=False)

    def cov_factor(self) -> np.ndarray:
        """|T| x r matrix ``L (I - pi)``; its outer square is ``cond_cov``."""
        return self.factor.iota @ self.factor.projection_perp

    def envelope(self, width: float = 2.0):
        sd = np.sqrt(np.clip(np.diag(self.cond_cov), 0.0, None))
        return self.mean - width * sd, self.mean + width * sd


@dataclass
class Check:
    passed: bool
    value: float
    threshold: float

    def to_dict(self) -> dict:
        return {"pass": bool(self.passed), "value": float(self.value), "threshold": float(self.threshold)}


@dataclass
class IdentityReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def to_dict(self) -> dict:
        out = {name: c.to_dict() for name, c in self.checks.items()}
        out["all_pass"] = self.passed
        return out


def _blocks(C, mask: SubsetMask):
    A = as_matrix(C)
    if A.shape != (mask.parent_size, mask.parent_size):
        raise ConditioningError("size-mismatch", f"matrix is {A.shape}, mask expects {mask.parent_size}")
    S = mask.indices
    return A, A[np.ix_(S, S)], A[:, S]


def _eigh_desc(A):
    try:
        lam, V = np.linalg.eigh((A + A.T) / 2)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("factorization-failure", str(exc)) from exc
    return lam[::-1], V[:, ::-1]


def _floor(A) -> float:
    # absolute eigenvalue floor: keeps a near-zero block from promoting rounding noise to rank
    return float(np.max(np.abs(np.diag(A)))) if A.size else 0.0


def observation_range(C, mask: SubsetMask, cutoff: float = CUTOFF):
    """Spectral pseudo-inverse of ``C_SS`` and an orthonormal basis of its range."""
    A, Css, _ = _blocks(C, mask)
    lam, V = _eigh_desc(Css)
    thr = cutoff * max(lam[0], _floor(A))
    keep = lam > thr
    Vk = V[:, keep]
    return (Vk / lam[keep]) @ Vk.T, Vk


def compute_m_delta(C, mask: SubsetMask, tol: float = DEGENERATE_TOL) -> MRatioReport:
    """Continuity ratio from point evaluations.

    For each observed node ``s`` the ratio of ``max_t |C[s, t]|`` to
    ``max_{s' in S} |C[s, s']|``; the largest ratio is returned with the
    first node attaining it. Rows with a vanishing denominator are skipped.
    """
    A, Css, _ = _blocks(C, mask)
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    S = mask.indices
    num = np.max(np.abs(A[S, :]), axis=1)
    den = np.max(np.abs(Css), axis=1)
    degenerate = den <= tol * scale
    if np.all(degenerate):
        raise ConditioningError("all-rows-degenerate", "the kernel vanishes on the observed subset")
    bad = degenerate & (num > tol * scale)
    if np.any(bad):
        raise ConditioningError(
            "inconsistent-kernel", f"rows {S[bad].tolist()} vanish on S but not on T (Schwarz violated)"
        )
    ratios = np.full(S.size, -np.inf)
    ratios[~degenerate] = num[~degenerate] / den[~degenerate]
    k = int(np.argmax(ratios))
    return MRatioReport(float(ratios[k]), int(S[k]), [int(i) for i in S[degenerate]])


def _search_opnorm(mean_map, Vk, budget, rng):
    """Lower bound for sup ||mean_map z|| / ||z|| over the observation range."""
    P = Vk @ Vk.T

    def ratio(z):
        size = np.max(np.abs(z)) if z.size else 0.0
        z = P @ z
        den = np.max(np.abs(z)) if z.size else 0.0
        # directions that project to rounding noise carry no information
        if den <= NOISE_FLOOR * size:
            return -np.inf
        return float(np.max(np.abs(mean_map @ z)) / den)

    k = mean_map.shape[1]
    starts = [np.sign(row) + (row == 0) for row in mean_map]
    starts += [rng.choice([-1.0, 1.0], size=k) for _ in range(budget)]
    best, best_z = -np.inf, None
    for z in starts:
        r = ratio(z)
        if r > best:
            best, best_z = r, z
    if best_z is None:
        return best, None
    # coordinate ascent over {-1, 0, 1} per coordinate
    z = best_z.astype(float).copy()
    for _ in range(3):
        improved = False
        for i in range(k):
            keep = z[i]
            for v in (-1.0, 0.0, 1.0):
                if v == keep:
                    continue
                z[i] = v
                r = ratio(z)
                if r > best + 1e-15:
                    best, keep, improved = r, v, True
            z[i] = keep
        if not improved:
            break
    return best, P @ z


def compute_m_opnorm(C, mask: SubsetMask, search_budget: int = 64, seed: int = 0,
                     cutoff: float = CUTOFF, tol: float = DEGENERATE_TOL) -> MRatioReport:
    """Operator-norm view of the continuity ratio.

    ``m_opnorm_lower`` is the best ratio ``||C_TS e|| / ||C_SS e||`` found over
    signed point evaluations, sign patterns of the mean map rows, random sign
    vectors and a coordinate-ascent refinement. ``m_opnorm_rowsum`` is the
    exact infinity-norm of the mean map on the observation range; it is only
    reported when ``C_SS`` has full rank apart from identically zero rows.
    """
    report = compute_m_delta(C, mask, tol)
    A, Css, Cts = _blocks(C, mask)
    pinv, Vk = observation_range(A, mask, cutoff)
    mean_map = Cts @ pinv
    rng = np.random.default_rng(seed)
    q_tol = tol * float(np.max(np.abs(A)))
    lower, witness = _search_opnorm(mean_map, Vk, int(search_budget), rng)

    # signed point evaluations e = +-delta_s, with the same degeneracy rule as m_delta
    skipped = set(report.skipped_rows)
    for j, s in enumerate(mask.indices):
        if s in skipped or Css[j, j] <= q_tol:
            continue
        r = float(np.max(np.abs(Cts[:, j])) / np.max(np.abs(Css[:, j])))
        if r > lower:
            lower, witness = r, Css[:, j].copy()
    report.m_opnorm_lower = float(lower)
    report.m_opnorm_witness = witness
    if Vk.shape[1] == mask.size - len(report.skipped_rows):
        report.m_opnorm_rowsum = float(np.max(np.sum(np.abs(mean_map), axis=1)))
    return report


def factorize(C, mask: SubsetMask, cutoff: float = CUTOFF) -> HilbertFactor:
    """Eigen-factor ``C = L L^T`` and the projection onto ``H_Y``."""
    A, _, _ = _blocks(C, mask)
    lam, Phi = _eigh_desc(A)
    lam = np.clip(lam, 0.0, None)
    r = int(np.sum(lam > cutoff * lam[0])) if lam[0] > 0 else 0
    L = Phi[:, :r] * np.sqrt(lam[:r])
    Ls = L[mask.indices, :]
    try:
        U, sig, Vt = np.linalg.svd(Ls.T, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("factorization-failure", str(exc)) from exc
    thr = cutoff * max(sig[0] ** 2 if sig.size else 0.0, _floor(A))
    keep = sig**2 > thr
    Uk = U[:, keep]
    pi = Uk @ Uk.T
    pi = (pi + pi.T) / 2
    # L_S = Vt^T diag(sig) U^T, so its pseudo-inverse is U diag(1/sig) Vt on the kept part
    ls_pinv = (Uk / sig[keep]) @ Vt[keep, :]
    return HilbertFactor(Phi, lam, r, pi, mask, cutoff, iota_s_pinv=ls_pinv)


def conditional_mean_map(factor: HilbertFactor, C, mask: SubsetMask, cutoff: Optional[float] = None) -> np.ndarray:
    """``C_TS C_SS^+`` with the spectral cutoff of ``factor``."""
    cutoff = factor.cutoff if cutoff is None else cutoff
    _, _, Cts = _blocks(C, mask)
    pinv, _ = observation_range(C, mask, cutoff)
    return Cts @ pinv


def mean_map_factor_route(factor: HilbertFactor) -> np.ndarray:
    """The mean map built as ``L pi L_S^+`` in factor coordinates."""
    return factor.iota @ factor.projection_HY @ factor.iota_s_pinv


def conditional_cov(factor: HilbertFactor, C=None, mask: Optional[SubsetMask] = None) -> np.ndarray:
    """``L (I - pi) L^T``: the conditional covariance, independent of the observation."""
    L = factor.iota
    Chat = L @ factor.projection_perp @ L.T
    return (Chat + Chat.T) / 2


def schur_cov(C, mask: SubsetMask, cutoff: float = CUTOFF) -> np.ndarray:
    """Schur-complement form ``C - C_TS C_SS^+ C_ST`` of the conditional covariance."""
    A, _, Cts = _blocks(C, mask)
    pinv, _ = observation_range(A, mask, cutoff)
    Chat = A - Cts @ pinv @ Cts.T
    return (Chat + Chat.T) / 2


def condition(C, mask: SubsetMask, y, tol: float = 1e-6, cutoff: float = CUTOFF,
              search_budget: int = 64, seed: int = 0, check_kernel: bool = True) -> ConditionalLaw:
    """Conditional law of the field given its values ``y`` on S.

    ``y`` is first projected onto the range of ``C_SS``; a residual larger
    than ``tol * ||y||_inf`` means the observation has probability zero under
    the prior and raises ``y-not-in-Y0``.
    """
    if check_kernel:
        rep = validate(C)
        if not rep.passed:
            raise ConditioningError(
                "invalid-kernel",
                f"covariance fails validation (min eig {rep.min_eigenvalue:.3g}, schwarz {rep.schwarz_violation:.3g})",
            )
    A, _, Cts = _blocks(C, mask)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != mask.size:
        raise ConditioningError("length-mismatch", f"observation has length {y.size}, |S| = {mask.size}")
    if not np.all(np.isfinite(y)):
        raise ConditioningError("invalid-observation", "observation must be finite")
    pinv, Vk = observation_range(A, mask, cutoff)
    y_proj = Vk @ (Vk.T @ y)
    residual = float(np.max(np.abs(y - y_proj)))
    if residual > tol * float(np.max(np.abs(y))):
        raise ConditioningError(
            "y-not-in-Y0", f"observation is {residual:.3g} away from the support of the observed field"
        )
    factor = factorize(A, mask, cutoff)
    mean_map = Cts @ pinv
    try:
        report = compute_m_opnorm(A, mask, search_budget, seed, cutoff)
    except ConditioningError as exc:
        if exc.code != "all-rows-degenerate":
            raise
        # field identically zero on S: the mean map is the zero operator
        report = MRatioReport(0.0, -1, [int(i) for i in mask.indices], 0.0, 0.0)
    return ConditionalLaw(
        mean_map=mean_map,
        mean=mean_map @ y_proj,
        cond_cov=conditional_cov(factor),
        y_projected=y_proj,
        projection_residual=residual,
        m_report=report,
        mask=mask,
        factor=factor,
    )


def verify_identities(law: ConditionalLaw, C, mask: SubsetMask, tol: float = 1e-8) -> IdentityReport:
    """Check the operator identities on a computed law.

    a) ``C - Chat`` is PSD;  b) ``m C_SS m^T = C_TS m^T``;  c) ``Chat`` vanishes
    on S rows;  d) the mean interpolates the observation;  e) the mean is a
    bounded extension with constant at most the operator norm.
    Thresholds are ``tol`` times ``max(1, scale)`` of the quantity compared.
    """
    A, Css, Cts = _blocks(C, mask)
    cscale = max(1.0, float(np.max(np.abs(A))))
    m = law.mean_map
    y = law.y_projected
    yscale = max(1.0, float(np.max(np.abs(y)))) if y.size else 1.0

    diff = A - law.cond_cov
    a = float(np.linalg.eigvalsh((diff + diff.T) / 2)[0])
    b = float(np.max(np.abs(m @ Css @ m.T - Cts @ m.T)))
    c = float(np.max(np.abs(law.cond_cov[mask.indices, :])))
    d = float(np.max(np.abs(restrict(law.mean, mask) - y)))
    bound = law.m_report.m_opnorm_rowsum
    if bound is None:
        # full-domain row sum still bounds the norm on the observation range
        bound = float(np.max(np.sum(np.abs(m), axis=1)))
    ynorm = float(np.max(np.abs(y))) if y.size else 0.0
    e_val = float(np.max(np.abs(law.mean)))
    e_thr = (bound + tol) * ynorm + tol * yscale
    checks = {
        "a_khat_le_k": Check(a >= -tol * cscale, a, -tol * cscale),
        "b_mean_map_symmetry": Check(b <= tol * cscale, b, tol * cscale),
        "c_khat_vanishes_on_S": Check(c <= tol * cscale, c, tol * cscale),
        "d_interpolation": Check(d <= tol * yscale, d, tol * yscale),
        "e_bounded_extension": Check(e_val <= e_thr, e_val, e_thr),
    }
    return IdentityReport(checks)
