import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftlab import core
from shiftlab.core import BasisWindow, CompactOp, UnitaryOp, identity, inverse, lower_bound_m, op_norm, projection_P
from shiftlab.errors import MalformedInputError, SingularityError, WindowMismatchError, WindowOverflowError

from conftest import rand_op


def diag_op(vals):
    w = BasisWindow((len(vals) - 1) // 2)
    return CompactOp(w, np.diag(np.asarray(vals, dtype=complex)))


def test_window_basics():
    w = BasisWindow(2)
    assert w.dim == 5
    assert list(w.indices) == [-2, -1, 0, 1, 2]
    assert w.position(-2) == 0
    with pytest.raises(WindowOverflowError):
        w.position(3)
    with pytest.raises(MalformedInputError):
        BasisWindow(-1)


def test_compact_op_validation(w3):
    with pytest.raises(MalformedInputError):
        CompactOp(w3, np.eye(3))
    bad = np.eye(7, dtype=complex)
    bad[0, 0] = np.nan
    with pytest.raises(MalformedInputError):
        CompactOp(w3, bad)
    a = CompactOp(w3, np.eye(7))
    with pytest.raises(ValueError):
        a.entries[0, 0] = 2.0
    with pytest.raises(WindowMismatchError):
        a @ identity(BasisWindow(2))


def test_op_norm_examples():
    assert op_norm(identity(BasisWindow(1))) == pytest.approx(1.0)
    assert op_norm(diag_op([2, 0.5, 1])) == pytest.approx(2.0)
    assert lower_bound_m(diag_op([2, 0.5, 1])) == pytest.approx(0.5)


def test_op_norm_eigen_oracle(rng):
    w = BasisWindow(4)
    for _ in range(20):
        a = rand_op(rng, w)
        ev = np.linalg.eigvalsh(a.entries.conj().T @ a.entries)
        assert op_norm(a) == pytest.approx(np.sqrt(ev[-1]), rel=1e-8)


def test_op_norm_power_iteration_branch(rng):
    w = BasisWindow(130)  # d = 261 > SVD_MAX_DIM
    assert w.dim > core.SVD_MAX_DIM
    d = w.dim
    vals = np.linspace(0.1, 1.0, d)
    vals[7] = 3.0
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    a = CompactOp(w, q @ np.diag(vals) @ q.T)
    assert op_norm(a) == pytest.approx(3.0, rel=1e-8)


def test_lower_bound_examples(rng):
    u = UnitaryOp.random(BasisWindow(3), rng)
    assert lower_bound_m(u.matrix) == pytest.approx(1.0, abs=1e-12)
    w = BasisWindow(2)
    a = rand_op(rng, w).entries.copy()
    a[:, 0] = a[:, 1]
    assert lower_bound_m(CompactOp(w, a)) <= 1e-12


def test_lower_bound_definition(rng):
    w = BasisWindow(3)
    for _ in range(5):
        a = rand_op(rng, w)
        m = lower_bound_m(a)
        for _ in range(100):
            h = rng.standard_normal(w.dim) + 1j * rng.standard_normal(w.dim)
            assert m * np.linalg.norm(h) <= np.linalg.norm(a @ h) + 1e-9
        assert m == pytest.approx(1 / op_norm(inverse(a)), rel=1e-8)


def test_projection():
    w = BasisWindow(3)
    assert projection_P(w, 3).allclose(identity(w))
    p0 = projection_P(w, 0)
    assert np.linalg.matrix_rank(p0.entries) == 1 and p0.entries[3, 3] == 1
    for m in range(4):
        p = projection_P(w, m)
        assert (p @ p).allclose(p) and p.H.allclose(p)
        for m2 in range(4):
            assert (p @ projection_P(w, m2)).allclose(projection_P(w, min(m, m2)))
    with pytest.raises(WindowOverflowError):
        projection_P(w, 4)


def test_inverse_and_adjoint(rng):
    w = BasisWindow(1)
    assert inverse(identity(w)).allclose(identity(w))
    assert inverse(diag_op([2, 4, 1])).allclose(diag_op([0.5, 0.25, 1]))
    with pytest.raises(SingularityError):
        inverse(diag_op([1, 0, 1]))
    a, b = rand_op(rng, BasisWindow(2)), rand_op(rng, BasisWindow(2))
    assert core.adjoint(core.matmul(a, b)).allclose(b.H @ a.H)
    assert core.add(a, b).allclose(b + a)


@given(st.integers(0, 2**32 - 1), st.integers(0, 5))
def test_submultiplicative_and_adjoint_norm(seed, m):
    rng = np.random.default_rng(seed)
    w = BasisWindow(m)
    a, b = rand_op(rng, w), rand_op(rng, w)
    assert op_norm(a @ b) <= op_norm(a) * op_norm(b) + 1e-9
    assert op_norm(a.H) == pytest.approx(op_norm(a), rel=1e-12)


def test_unitary_kinds(rng):
    w = BasisWindow(3)
    d = w.dim
    theta = rng.uniform(0, 6, d)
    ph = UnitaryOp.phases(w, theta)
    np.testing.assert_allclose(ph.power(5).entries, np.diag(np.exp(5j * theta)), atol=1e-12)
    sh = UnitaryOp.shift(w, 1)
    assert np.allclose(sh.matrix @ w.basis_vector(0), w.basis_vector(1))
    assert np.allclose(sh.matrix @ w.basis_vector(3), w.basis_vector(-3))  # wraps
    perm = rng.permutation(d)
    pu = UnitaryOp.permutation(w, perm)
    for n in (1, 2, 5, 13, -3):
        ref = np.linalg.matrix_power(pu.matrix.entries, n) if n > 0 else \
            np.linalg.matrix_power(pu.matrix.entries.conj().T, -n)
        np.testing.assert_allclose(pu.power(n).entries, ref, atol=1e-12)
    hu = UnitaryOp.random(w, rng)
    np.testing.assert_allclose(hu.power(7).entries, np.linalg.matrix_power(hu.matrix.entries, 7), atol=1e-10)
    np.testing.assert_allclose(hu.power(-2).entries, (hu.matrix @ hu.matrix).H.entries, atol=1e-12)
    big = hu.power(200).entries
    np.testing.assert_allclose(big.conj().T @ big, np.eye(d), atol=1e-12)
    assert UnitaryOp.identity(w).power(9).allclose(identity(w))


def test_unitary_rejects_bad_input(w3):
    with pytest.raises(MalformedInputError):
        UnitaryOp.from_matrix(w3, 2 * np.eye(7))
    with pytest.raises(MalformedInputError):
        UnitaryOp.permutation(w3, [0] * 7)
    with pytest.raises(MalformedInputError):
        UnitaryOp(w3, "rotation")
