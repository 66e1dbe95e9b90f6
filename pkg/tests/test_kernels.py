import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condfield import ConditioningError, KernelSpec, assemble, build_grid, bumps_kernel, load_matrix_csv, mask_from_intervals, validate
from condfield.grid import Grid
from condfield.kernels import bump_layout

from helpers import bumps_setup


def test_brownian_matrix():
    C = assemble(KernelSpec("brownian"), Grid([0.25, 0.5, 1.0])).entries
    assert C.tolist() == [[.25, .25, .25], [.25, .5, .5], [.25, .5, 1.0]]


def test_constant_and_ou():
    assert np.all(assemble(KernelSpec("constant", level=1.0), build_grid(0, 3, 4)).entries == 1.0)
    C = assemble(KernelSpec("ornstein_uhlenbeck", length_scale=1.0), build_grid(0, 1, 2)).entries
    assert np.allclose(C, [[1, np.exp(-1)], [np.exp(-1), 1]], rtol=0, atol=1e-15)


def test_custom_matrix_size_mismatch():
    spec = KernelSpec("custom_matrix", matrix=np.eye(3))
    with pytest.raises(ConditioningError, match="size-mismatch"):
        assemble(spec, build_grid(0, 1, 4))


def test_unknown_variant_names_field():
    with pytest.raises(ConditioningError, match="kernel.variant"):
        KernelSpec.from_dict({"variant": "matern"})


def test_validate_reports():
    C = assemble(KernelSpec("brownian"), Grid([0.25, 0.5, 1.0]))
    rep = validate(C)
    # independent eigen-solve of the same matrix
    assert rep.passed and rep.min_eigenvalue > 0
    assert np.isclose(rep.min_eigenvalue, np.linalg.eigvalsh(C.entries)[0])
    bad = validate(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not bad.passed and bad.schwarz_violation == pytest.approx(3.0)
    assert validate(np.zeros((3, 3))).passed
    assert not validate(np.array([[1.0, 0.5], [0.4, 1.0]])).passed


GRIDS = st.tuples(st.floats(0.0, 2.0), st.floats(0.1, 3.0), st.integers(2, 60))
SPECS = st.one_of(
    st.just(KernelSpec("brownian")),
    st.floats(0.05, 5.0).map(lambda l: KernelSpec("ornstein_uhlenbeck", length_scale=l)),
    st.floats(0.05, 5.0).map(lambda l: KernelSpec("squared_exponential", length_scale=l)),
    st.sampled_from(["linear", "quadratic", "sine", "cosine", "exp"]).map(lambda p: KernelSpec("rank_one", profile=p)),
    st.floats(0.0, 3.0).map(lambda v: KernelSpec("constant", level=v)),
)


@settings(max_examples=150, deadline=None)
@given(SPECS, GRIDS)
def test_builtin_kernels_validate(spec, g):
    grid = build_grid(g[0], g[0] + g[1], g[2])
    C = assemble(spec, grid)
    assert np.array_equal(C.entries, C.entries.T)
    assert validate(C).passed
    if spec.stationary:
        d = np.diag(C.entries)
        assert np.all(d == d[0])


def test_bumps_structure():
    grid, mask, C = bumps_setup(3)
    s, t = bump_layout(3, grid, mask)
    A = C.entries
    assert np.linalg.matrix_rank(A) == 3
    assert validate(C).passed
    blocks = [np.arange(c - 1, c + 2) for c in s]
    tblocks = [np.arange(c - 1, c + 2) for c in t]
    for i in range(3):
        for j in range(3):
            if i != j:
                assert np.all(A[np.ix_(blocks[i], tblocks[j])] == 0)
                assert np.all(A[np.ix_(blocks[i], blocks[j])] == 0)
    assert all(c in mask.indices for c in s) and not any(c in mask.indices for c in t)


def test_bumps_errors():
    grid = build_grid(0, 1, 9)
    mask = mask_from_intervals(grid, [[0, 0.5]])
    with pytest.raises(ConditioningError, match="grid-too-coarse"):
        bumps_kernel(0, 2.0, 0.5, grid, mask)
    with pytest.raises(ConditioningError, match="grid-too-coarse"):
        bumps_kernel(3, 2.0, 0.5, grid, mask)
    with pytest.raises(ConditioningError):
        bumps_kernel(1, 1.0, 0.5, grid, mask)


def test_load_matrix_csv(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,0.5\n0.5,2\n")
    assert load_matrix_csv(p).tolist() == [[1, 0.5], [0.5, 2]]
    p.write_text("1,2,3\n4,5,6\n")
    with pytest.raises(ConditioningError):
        load_matrix_csv(p)
