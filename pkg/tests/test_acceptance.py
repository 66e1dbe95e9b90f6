"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed with
output capture disabled so they show up in the normal pytest log).
"""

import time

import numpy as np
import pytest

from condfield import (
    KernelSpec,
    assemble,
    build_grid,
    compute_m_delta,
    compute_m_opnorm,
    condition,
    exhaustive_m_opnorm,
    factorize,
    mask_from_intervals,
    schur_condition,
    verify_identities,
)
from condfield.grid import SubsetMask
from condfield.montecarlo import (
    check_disintegration,
    check_weak_continuity,
    coordinate,
    constant,
    divergence_demo,
    rejection_oracle,
    sample_prior,
    squared_coordinate,
    support_residual,
    tanh_linear,
    total_variance_gap,
)

from helpers import full_rank_instance, random_kernel, y_in_range


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, elapsed, budget, detail=""):
        status = "PASS" if ok and elapsed < budget else "FAIL"
        with capsys.disabled():
            print(f"\n[acceptance {number:>2}] {status}  {title}  ({elapsed:.2f}s / {budget:g}s)  {detail}")
        assert ok, detail
        assert elapsed < budget, f"runtime {elapsed:.2f}s exceeds {budget}s"

    return emit


def brownian(n, hi=0.5):
    grid = build_grid(0.0, 1.0, n)
    mask = mask_from_intervals(grid, [[0.0, hi]])
    return grid, mask, assemble(KernelSpec("brownian"), grid).entries


def hundred_instances():
    rng = np.random.default_rng(2024)
    out = []
    for _ in range(100):
        C, mask = random_kernel(rng, max_n=12)
        out.append((C, mask, y_in_range(rng, C, mask)))
    return out


def test_01_stationary_ratio_is_one(report):
    start = time.perf_counter()
    worst = 0.0
    specs = [KernelSpec("ornstein_uhlenbeck", length_scale=l) for l in (0.3, 1.0, 3.0)]
    specs.append(KernelSpec("squared_exponential", length_scale=1.0))
    for n in (11, 51, 201):
        grid = build_grid(0.0, 1.0, n)
        mask = mask_from_intervals(grid, [[0.0, 0.5]])
        for spec in specs:
            m = compute_m_delta(assemble(spec, grid), mask).m_delta
            worst = max(worst, abs(m - 1.0))
    elapsed = time.perf_counter() - start
    report(1, "stationary kernels give m_delta = 1", worst <= 1e-12, elapsed, 1.0, f"max |m_delta - 1| = {worst:.2e}")


def test_02_brownian_closed_form(report):
    start = time.perf_counter()
    grid, mask, C = brownian(101)
    rng = np.random.default_rng(5)
    y = y_in_range(rng, C, mask)
    law = condition(C, mask, y)
    t = grid.points
    right = t > 0.5 + 1e-12
    mean_err = float(np.max(np.abs(law.mean[right] - law.y_projected[-1])))
    tail = t >= 0.5 - 1e-12
    closed = np.minimum.outer(t[tail], t[tail]) - 0.5
    cov_err = float(np.max(np.abs(law.cond_cov[np.ix_(tail, tail)] - closed)))
    m_err = abs(law.m_report.m_delta - 1.0)
    elapsed = time.perf_counter() - start
    ok = m_err <= 1e-12 and mean_err <= 1e-8 and cov_err <= 1e-8
    report(2, "brownian closed form", ok, elapsed, 1.0,
           f"|M-1| = {m_err:.1e}, mean err = {mean_err:.1e}, cov err = {cov_err:.1e}")


def test_03_operator_identities(report):
    start = time.perf_counter()
    failures = []
    for i, (C, mask, y) in enumerate(hundred_instances()):
        law = condition(C, mask, y)
        rep = verify_identities(law, C, mask, tol=1e-8)
        if not rep.passed:
            failures.append((i, [k for k, c in rep.checks.items() if not c.passed]))
    elapsed = time.perf_counter() - start
    report(3, "identities (a)-(e) on 100 random kernels", not failures, elapsed, 10.0,
           f"{100 - len(failures)}/100 pass {failures[:3]}")


def test_04_core_matches_oracle(report):
    start = time.perf_counter()
    worst_mean = worst_cov = 0.0
    for C, mask, y in hundred_instances():
        law = condition(C, mask, y)
        ref = schur_condition(C, mask, law.y_projected)
        scale = 1.0 + float(np.max(np.abs(y)))
        worst_mean = max(worst_mean, float(np.max(np.abs(law.mean - ref.mean))) / scale)
        worst_cov = max(worst_cov, float(np.max(np.abs(law.cond_cov - ref.cov))))
    elapsed = time.perf_counter() - start
    ok = worst_mean <= 1e-8 and worst_cov <= 1e-8
    report(4, "core vs pivoted-Cholesky oracle on 100 instances", ok, elapsed, 10.0,
           f"mean err = {worst_mean:.1e}, cov err = {worst_cov:.1e}")


def test_05_disintegration_equation(report):
    start = time.perf_counter()
    grid, mask, C = brownian(33)
    last = grid.size - 1
    w = np.random.default_rng(11).standard_normal(grid.size) / grid.size
    fs = [constant(1.0), coordinate(last), squared_coordinate(last), tanh_linear(w)]
    reps = check_disintegration(C, mask, fs, n_outer=2000, n_inner=50, seed=1)
    y = C[np.ix_(mask.indices, mask.indices)] @ np.ones(mask.size)
    gap = total_variance_gap(condition(C, mask, y), C)
    elapsed = time.perf_counter() - start
    zs = [r.z_score for r in reps]
    ok = all(r.passed for r in reps) and gap <= 1e-8
    report(5, "disintegration equation (MC z-tests) + total variance", ok, elapsed, 60.0,
           "z = [" + ", ".join(f"{z:+.2f}" for z in zs) + f"], gap = {gap:.1e}")


def test_06_rejection_oracle(report):
    start = time.perf_counter()
    grid, mask, C = brownian(33)
    probe = [grid.index_of(0.5)]
    reps = rejection_oracle(C, mask, [0.3], delta=0.05, probe_indices=probe, n=200000, seed=3,
                            t_indices=[grid.index_of(1.0)])
    r = reps[0]
    elapsed = time.perf_counter() - start
    ok = abs(r.reference - 0.3) <= 1e-8 and abs(r.estimate - 0.3) <= 3 * r.stderr + 0.05
    report(6, "rejection sampling agrees with m(y, 1) = 0.3", ok, elapsed, 60.0,
           f"empirical = {r.estimate:.4f} +- {r.stderr:.4f} ({r.note})")


def test_07_weak_continuity(report):
    start = time.perf_counter()
    grid, mask, C = brownian(101)
    y = y_in_range(np.random.default_rng(8), C, mask)
    rep = check_weak_continuity(C, mask, y, [1e-1, 1e-2, 1e-3], seed=4)
    elapsed = time.perf_counter() - start
    ok = rep.cov_identical and all(r <= rep.bound + 1e-8 for r in rep.ratios)
    report(7, "mean continuity at fixed covariance", ok, elapsed, 5.0,
           "ratios = [" + ", ".join(f"{r:.6f}" for r in rep.ratios) + f"], M = {rep.bound:.6f}, "
           f"cov identical = {rep.cov_identical}")


def test_08_unbounded_ratio(report):
    start = time.perf_counter()
    grid = build_grid(0.0, 1.0, 61)
    mask = mask_from_intervals(grid, [[0.0, 0.5]])
    rows = divergence_demo(2.0, range(1, 7), grid, mask)
    elapsed = time.perf_counter() - start
    m_ok = [r.m_delta for r in rows] == [2.0**N for N in range(1, 7)]
    y_ok = all(abs(r.y_norm - 1.0 / r.n_bumps) <= 1e-15 for r in rows)
    mean_ok = all(r.mean_norm >= 1.0 for r in rows)
    report(8, "bumps family: M = 2^N, y_N -> 0, ||m(y_N)|| >= 1", m_ok and y_ok and mean_ok, elapsed, 5.0,
           "m_delta = " + str([r.m_delta for r in rows]) + ", mean norms = ["
           + ", ".join(f"{r.mean_norm:.3f}" for r in rows) + "]")


def test_09_opnorm_sandwich(report):
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    bad, worst_gap = [], 0.0
    for i in range(50):
        C, mask = full_rank_instance(rng, max_s=3)
        rep = compute_m_opnorm(C, mask, seed=i)
        exact = exhaustive_m_opnorm(C, mask)
        sandwich = rep.m_delta <= exact * (1 + 1e-12) and exact <= rep.m_opnorm_rowsum + 1e-10
        gap = (exact - rep.m_opnorm_lower) / exact
        worst_gap = max(worst_gap, gap)
        if not sandwich or gap > 0.05 or rep.m_opnorm_lower > exact * (1 + 1e-10):
            bad.append(i)
    elapsed = time.perf_counter() - start
    report(9, "m_delta <= exhaustive <= rowsum, search within 5%", not bad, elapsed, 30.0,
           f"{50 - len(bad)}/50 pass, worst relative search gap = {worst_gap:.2e}")


def test_10_sampler_support(report):
    start = time.perf_counter()
    grid = build_grid(0.0, 1.0, 51)
    C = assemble(KernelSpec("rank_one", profile="sine"), grid).entries
    mask = SubsetMask(np.array([0, 25]), grid.size)
    paths = sample_prior(factorize(C, mask), 1000, seed=10).paths
    res = support_residual(paths, C)
    elapsed = time.perf_counter() - start
    report(10, "rank-deficient prior paths stay in range(C)", bool(np.all(res <= 1e-6)), elapsed, 5.0,
           f"max residual = {float(np.max(res)):.1e} over {paths.shape[0]} paths")
