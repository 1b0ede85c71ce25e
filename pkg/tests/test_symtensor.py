import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourthmoment import _oracles as O
from fourthmoment import symtensor as S
from fourthmoment.errors import DimensionMismatch
from fourthmoment.symtensor import BlockKernel, SymKernel

R2 = 1 / math.sqrt(2)


@pytest.mark.parametrize("alpha,expected", [((1, 2, 3), 6), ((1, 1), 1), ((1, 1, 2), 3), ((), 1)])
def test_count(alpha, expected):
    assert S.count(alpha) == expected


def test_inner_ambient_examples():
    e11 = SymKernel.basis_power(2, 1, 2)
    e22 = SymKernel.basis_power(2, 2, 2)
    f12 = SymKernel.make(2, 2, {(1, 2): 1.0})
    assert S.inner_ambient(e11, e11) == 1.0
    assert S.inner_ambient(e11, e22) == 0.0
    assert S.inner_ambient(f12, f12) == 2.0
    assert S.inner_ambient(f12, f12) == O.dense_inner(O.to_dense(f12), O.to_dense(f12))


def test_norm_modified_examples():
    assert S.norm_modified(SymKernel.basis_power(2, 1, 2)) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert S.norm_modified(SymKernel.basis_power(2, 1, 1)) == 1.0
    assert S.norm_modified(SymKernel.make(2, 2, {(1, 1): 0.5, (2, 2): 0.5})) == pytest.approx(1.0, abs=1e-15)


def test_contract_examples():
    e11 = SymKernel.basis_power(2, 1, 2)
    t = S.contract(e11, e11, 1)
    assert (t.p, t.q) == (1, 1)
    assert dict(t.entries) == {((1,), (1,)): 1.0}
    f = SymKernel.make(2, 2, {(1, 1): R2, (2, 2): R2})
    assert S.contract(f, f, 2).scalar() == pytest.approx(1.0, abs=1e-15)


def test_contract_order2_is_matrix_product(random_kernel):
    f, g = random_kernel(3, 2), random_kernel(3, 2)
    t = S.contract(f, g, 1)
    A, B = O.to_dense(f), O.to_dense(g)
    np.testing.assert_allclose(O.block_to_dense(t), A @ B, atol=1e-14)


def test_symmetrize_examples():
    assert S.symmetrize_block(BlockKernel(2, 1, 1, {((1,), (1,)): 1.0})) == SymKernel.basis_power(2, 1, 2)
    s = S.symmetrize_block(BlockKernel(2, 1, 1, {((1,), (2,)): 1.0}))
    assert dict(s.entries) == {(1, 2): 0.5}


def test_symmetrize_random_2x2(gen):
    M = gen.normal(size=(2, 2))
    t = BlockKernel(2, 1, 1, {((i + 1,), (j + 1,)): M[i, j] for i in range(2) for j in range(2)})
    np.testing.assert_allclose(O.to_dense(S.symmetrize_block(t)), (M + M.T) / 2, atol=1e-15)


def test_symmetrize_idempotent(random_kernel):
    f = random_kernel(3, 3)
    t = BlockKernel(3, 3, 0, {(a, ()): v for a, v in f.items()})
    assert S.symmetrize_block(t) == f


def test_slice_examples():
    e11 = SymKernel.basis_power(2, 1, 2)
    assert S.slice(e11, 1) == SymKernel.basis_power(2, 1, 1)
    assert S.slice(e11, 2).is_zero() and S.slice(e11, 2).order == 1
    assert dict(S.slice(SymKernel.make(2, 2, {(1, 2): 1.0}), 2).entries) == {(1,): 1.0}


def test_slice_matches_dense(random_kernel):
    f = random_kernel(3, 3)
    for j in (1, 2, 3):
        np.testing.assert_allclose(O.to_dense(S.slice(f, j)), O.dense_slice(O.to_dense(f), j), atol=1e-15)


def test_validation():
    with pytest.raises(ValueError):
        SymKernel(2, 2, {(1, 3): 1.0})
    with pytest.raises(ValueError):
        SymKernel(2, 2, {(1,): 1.0})
    with pytest.raises(DimensionMismatch):
        S.add(SymKernel.basis_power(2, 1, 2), SymKernel.basis_power(3, 1, 2))


def test_tiny_entries_dropped():
    f = SymKernel.make(1, 1, {(1,): 1.0})
    assert (f - f * (1 - 1e-17)).is_zero()


def test_order_zero_contraction_is_scalar():
    f = SymKernel.make(2, 1, {(1,): 2.0, (2,): 3.0})
    assert S.contract(f, f, 1).scalar() == 13.0
    assert SymKernel.scalar(2, 4.0).value() == 4.0


kernels = st.builds(
    lambda seed, d, n, m: tuple(O.random_kernel(np.random.default_rng(seed), d, k, 5) for k in (n, m)),
    st.integers(0, 2**32 - 1),
    st.integers(1, 4),
    st.integers(1, 3),
    st.integers(1, 3),
)


@settings(max_examples=60, deadline=None)
@given(kernels)
def test_dense_oracle_property(pair):
    f, g = pair
    A, B = O.to_dense(f), O.to_dense(g)
    for l in range(min(f.order, g.order) + 1):
        t = S.contract(f, g, l)
        D = O.dense_contract(A, B, l)
        np.testing.assert_allclose(O.block_to_dense(t), D, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(O.to_dense(S.symmetrize_block(t)), O.dense_symmetrize(D), rtol=1e-10, atol=1e-12)
        assert t.norm_ambient_sq() == pytest.approx(float(np.sum(D * D)), rel=1e-10, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(kernels)
def test_contraction_identity_and_bound(pair):
    f, g = pair
    n, m = f.order, g.order
    for r in range(1, min(n, m) + 1):
        lhs = S.contract(f, g, r).norm_ambient_sq()
        ff, gg = S.contract(f, f, n - r), S.contract(g, g, m - r)
        assert lhs == pytest.approx(S.inner_block(ff, gg), rel=1e-10, abs=1e-14)
        assert lhs <= ff.norm_ambient() * gg.norm_ambient() * (1 + 1e-12) + 1e-15


@settings(max_examples=40, deadline=None)
@given(kernels, st.integers(0, 2**32 - 1))
def test_label_permutation_invariance(pair, seed):
    f, g = pair
    perm = dict(zip(range(1, f.dim + 1), (int(v) + 1 for v in np.random.default_rng(seed).permutation(f.dim))))
    fp, gp = S.permute_labels(f, perm), S.permute_labels(g, perm)
    assert S.inner_ambient(fp, fp) == pytest.approx(S.inner_ambient(f, f), rel=1e-12)
    for l in range(min(f.order, g.order) + 1):
        a, b = S.contract(f, g, l), S.contract(fp, gp, l)
        assert a.norm_ambient() == pytest.approx(b.norm_ambient(), rel=1e-12, abs=1e-15)
        assert S.symmetrize_block(a).norm_ambient() <= a.norm_ambient() * (1 + 1e-12) + 1e-15
