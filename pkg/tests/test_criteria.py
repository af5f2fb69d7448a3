import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftlab.constructions import GridModel, TranslationWeightParams, cutoff_provider, salas_weights, translation_weights
from shiftlab.core import BasisWindow, CompactOp, UnitaryOp, identity, projection_P
from shiftlab.criteria import (
    ApproximantProvider, PowerSchedule, TestVectorSets, check_avg_transitivity, check_chaos,
    check_dense_hypercyclicity, check_necessary_periodic_S, check_necessary_periodic_T,
    check_pointwise_sufficient, geometric_tail, series_terms,
)
from shiftlab.errors import HorizonExceededError, MalformedInputError, PreconditionError, ProviderError
from shiftlab.report import CSV_HEADER, NOT_SATISFIED, SATISFIED, CriterionReport, Row, limit_verdict
from shiftlab.shift import ShiftOperator, WeightFamily, identity_family

from families import random_family

W = BasisWindow(3)
SALAS = ShiftOperator(salas_weights(W, 2.0), UnitaryOp.identity(W))
IDENT = ShiftOperator(identity_family(W), UnitaryOp.identity(W))
K40 = PowerSchedule.arithmetic(1, 1, 40)


def test_schedule():
    s = PowerSchedule((3, 5, 9), max_k=2)
    assert s.t == (3, 5) and list(s) == [(1, 3), (2, 5)]
    assert PowerSchedule.arithmetic(2, 3, 4).t == (2, 5, 8, 11)
    assert PowerSchedule.geometric(1, 2.0, 5).t == (1, 2, 4, 8, 16)
    assert PowerSchedule.geometric(1, 1.1, 4).t == (1, 2, 3, 4)
    assert PowerSchedule.arithmetic(1, 1, 5).without([2, 4]).t == (1, 3, 5)
    for bad in ((), (0, 1), (3, 2), (1, 1)):
        with pytest.raises(MalformedInputError):
            PowerSchedule(bad)


def test_provider_contract():
    p = ApproximantProvider(lambda j, k: (identity(W) * 2.0, identity(W)), bound=1.0)
    with pytest.raises(ProviderError):
        p(0, 1)
    boom = ApproximantProvider(lambda j, k: 1 / 0)
    with pytest.raises(ProviderError):
        boom(0, 1)
    with pytest.raises(ProviderError):
        ApproximantProvider(lambda j, k: (np.eye(7), np.eye(7)))(0, 1)


def test_test_vectors_must_be_unit():
    with pytest.raises(MalformedInputError):
        TestVectorSets({0: [np.ones(7)]}, {0: []})
    tv = TestVectorSets.uniform(1, [np.ones(7)])
    assert set(tv.h1) == {-1, 0, 1}


def test_limit_verdict():
    ok, first = limit_verdict({"a": [1.0, 1e-7, 1e-8, 1e-9]}, 1e-6)
    assert ok and first == 2
    ok, first = limit_verdict({"a": [1e-7, 1e-8, 1e-7, 1e-8]}, 1e-6)
    assert not ok and first == 1  # tail not monotone
    ok, _ = limit_verdict({"a": [1e-7, 1e-8], "b": [1.0, 1.0]}, 1e-6)
    assert not ok
    ok, _ = limit_verdict({"a": [1e-7, math.inf, 1e-9]}, 1e-6)
    assert not ok
    assert limit_verdict({}, 1e-6) == (False, None)


def test_report_csv_round_trip():
    vals = [1 / 3, 2.0 ** -40, 0.1 + 0.2]
    rep = CriterionReport("x", "c", True, 1e-6, [Row(0, k + 1, k + 2, "q", v) for k, v in enumerate(vals)])
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert tuple(rows[0]) == CSV_HEADER
    assert [float(r[-1]) for r in rows[1:]] == vals
    assert rep.verdict == SATISFIED
    with pytest.raises(ValueError):
        CriterionReport("x", "c", True, 1e-6, [Row(0, 1, 1, "q", math.nan)])


def test_dense_hc_salas_closed_form():
    rep = check_dense_hypercyclicity(SALAS, K40, ApproximantProvider.constant(W, 2), 0, 2)
    t = rep.t_values("forward", 0)
    np.testing.assert_allclose(rep.series("forward", 0), 2.0 ** -t, rtol=1e-12)
    assert rep.satisfied and rep.t_values("forward", 0)[rep.first_k - 1] == 20


def test_dense_hc_identity_not_satisfied():
    rep = check_dense_hypercyclicity(IDENT, K40, ApproximantProvider.constant(W, 2), 1, 2)
    assert not rep.satisfied and rep.verdict == NOT_SATISFIED
    assert np.all(rep.series("approx_D", 0) == 0) and np.allclose(rep.series("forward", 1), 1.0)


def _translation(m_max=33, eps=0.75):
    g = GridModel(m_max, 1.0)
    return g, translation_weights(g, TranslationWeightParams.constant_by_sign(eps))


def _column_oracle(wfun, cols, n, forward):
    """Independent scalar evaluation: the product matrix maps each column to one row,
    so its norm is the largest column weight product."""
    best = 0.0
    for i in cols:
        if forward:
            prod = np.prod([wfun(i + l) for l in range(1, n + 1)])
        else:
            prod = np.prod([1 / wfun(i - l) for l in range(n)])
        best = max(best, prod)
    return best


def test_dense_hc_translation_matches_scalar_oracle():
    eps, m = 0.75, 2
    g, fam = _translation()
    op = ShiftOperator(fam, UnitaryOp.identity(g.window))
    sched = PowerSchedule.arithmetic(4, 1, 20)
    rep = check_dense_hypercyclicity(op, sched, cutoff_provider(g.window, m), 0, m)
    assert rep.satisfied

    def wfun(t):
        return 1 - eps if t >= 0 else 1 / (1 - eps)

    for k, n in sched:
        cols = range(-min(k, m), min(k, m) + 1)
        assert rep.series("forward", 0)[k - 1] == pytest.approx(_column_oracle(wfun, cols, n, True), rel=1e-12)
        assert rep.series("inverse", 0)[k - 1] == pytest.approx(_column_oracle(wfun, cols, n, False), rel=1e-12)
    # hand bound at the worst column: (1 - eps)^(n - 2m + 2) once k >= m
    n = sched.t[-1]
    assert rep.series("forward", 0)[-1] == pytest.approx((1 - eps) ** (n - 2 * m + 2), rel=1e-12)


def test_horizon_guard():
    g, fam = _translation(m_max=10)
    op = ShiftOperator(fam, UnitaryOp.identity(g.window))
    with pytest.raises(HorizonExceededError):
        check_dense_hypercyclicity(op, PowerSchedule((5, 9)), ApproximantProvider.constant(g.window, 2), 0, 2)
    with pytest.raises(PreconditionError):
        check_necessary_periodic_T(fam, PowerSchedule((2,)), 0)


def test_pointwise_sufficient():
    e0 = W.basis_vector(0)
    tv = TestVectorSets.uniform(1, [e0])
    rep = check_pointwise_sufficient(SALAS, K40, tv, 0)
    np.testing.assert_allclose(rep.series("forward[0]", 0), 2.0 ** -rep.t_values("forward[0]", 0), rtol=1e-12)
    assert rep.satisfied
    assert not check_pointwise_sufficient(IDENT, K40, tv, 0).satisfied

    # decays on the e_0 coordinate only
    def provider(j):
        d = np.ones(W.dim)
        d[W.position(0)] = 0.5 if j >= 1 else 2.0
        return CompactOp(W, np.diag(d))

    fam = WeightFamily(W, provider, 2.0, 2.0)
    op = ShiftOperator(fam, UnitaryOp.identity(W))
    assert check_pointwise_sufficient(op, K40, tv, 1).satisfied
    assert not check_pointwise_sufficient(op, K40, TestVectorSets.uniform(1, [W.basis_vector(2)]), 1).satisfied


def test_chaos_closed_form():
    sched = PowerSchedule.arithmetic(16, 1, 10)
    rep = check_chaos(SALAS, sched, ApproximantProvider.constant(W, 1), 0, 1, series_cutoff=8)
    for k, n in sched:
        r = 2.0 ** -n
        assert rep.series("forward_bound", 0)[k - 1] == pytest.approx(r / (1 - r), rel=1e-8)
        assert rep.series("inverse_partial", 0)[k - 1] == pytest.approx(r * (1 - r ** 8) / (1 - r), rel=1e-12)
    # 2^-20 / (1 - 2^-20) < 1e-6 already, so the first certified power is 20 (<= 21)
    assert rep.satisfied and sched.t[rep.first_k - 1] == 20
    assert "sufficient" in rep.condition


def test_chaos_identity_unbounded():
    rep = check_chaos(IDENT, PowerSchedule((4, 8)), ApproximantProvider.constant(W, 1), 0, 1, series_cutoff=4)
    assert not rep.satisfied
    assert {f["status"] for f in rep.flags} == {"unbounded"}


def test_chaos_polynomial_decay_flags_divergence():
    # scalar weights whose products decay like 1/n: harmonic-like series
    def w(j):
        return j / (j + 1) if j >= 1 else (abs(j) + 2) / (abs(j) + 1)

    fam = WeightFamily.scalar(W, w, 2.0, 2.0)
    op = ShiftOperator(fam, UnitaryOp.identity(W))
    rep = check_chaos(op, PowerSchedule((5, 10, 20)), ApproximantProvider.constant(W, 1), 0, 1, series_cutoff=16)
    assert not rep.satisfied
    assert {f["status"] for f in rep.flags} == {"sub-geometric"}
    partial = rep.series("forward_partial", 0)
    last = rep.series("forward_last_term", 0)
    assert np.all(partial > 10 * last)  # far from a geometric tail


def test_geometric_tail_statuses():
    assert geometric_tail([1.0, 0.5]) == (0.5, "geometric")
    assert geometric_tail([1.0, 0.0]) == (0.0, "terminated")
    assert geometric_tail([1.0, 1.0])[1] == "unbounded"
    assert geometric_tail([1.0, 0.5, 0.3])[1] == "sub-geometric"
    with pytest.raises(PreconditionError):
        geometric_tail([1.0])


def test_series_terms_blockwise_matches_direct():
    fam = random_family(BasisWindow(1), 4)
    d = projection_P(BasisWindow(1), 1)
    fwd, inv = series_terms(fam, 0, 2, d, 3)
    from shiftlab.shift import forward_product, inverse_product
    from shiftlab.core import op_norm
    for l in range(1, 4):
        assert fwd[l - 1] == pytest.approx(op_norm(forward_product(fam, 0, 2 * l) @ d), rel=1e-10)
        assert inv[l - 1] == pytest.approx(op_norm(inverse_product(fam, 0, 2 * l) @ d), rel=1e-10)


def test_avg_transitivity():
    prov = cutoff_provider(W, 2)
    rep = check_avg_transitivity(SALAS, K40, prov, 1, 2)
    assert rep.satisfied and "sufficient" in rep.condition
    assert len(rep.quantities()) == 8
    assert not check_avg_transitivity(IDENT, K40, prov, 0, 2).satisfied


@pytest.mark.parametrize("name", ["salas", "identity", "random", "translation"])
def test_avg_implies_dense(name):
    if name == "translation":
        g, fam = _translation(m_max=40)
        op, sched = ShiftOperator(fam, UnitaryOp.identity(g.window)), PowerSchedule.arithmetic(1, 1, 19)
    else:
        fam = {"salas": salas_weights(W, 2.0), "identity": identity_family(W), "random": random_family(W, 2)}[name]
        op, sched = ShiftOperator(fam, UnitaryOp.identity(W)), PowerSchedule.arithmetic(1, 1, 30)
    prov = cutoff_provider(op.window, 2)
    avg = check_avg_transitivity(op, sched, prov, 1, 2)
    dense = check_dense_hypercyclicity(op, sched, prov, 1, 2)
    assert (not avg.satisfied) or dense.satisfied


def test_necessary_salas():
    rep_t = check_necessary_periodic_T(SALAS.weights, K40, 0)
    np.testing.assert_allclose(rep_t.series("m_lower_bound", 0), 2.0 ** -rep_t.t_values("m_lower_bound", 0), rtol=1e-10)
    rep_s = check_necessary_periodic_S(SALAS.weights, PowerSchedule.arithmetic(1, 1, 30), 2)
    np.testing.assert_allclose(rep_s.series("m_lower_bound", -1), 2.0 ** -rep_s.t_values("m_lower_bound", -1), rtol=1e-10)
    assert rep_t.satisfied and rep_s.satisfied and rep_t.condition == "necessary condition"


def test_necessary_isometric_weights(rng):
    rots = {}

    def provider(j):
        if j not in rots:
            rots[j] = UnitaryOp.random(W, np.random.default_rng(j + 100)).matrix
        return rots[j]

    for fam in (identity_family(W), WeightFamily(W, provider, 1.0, 1.0)):
        for check in (check_necessary_periodic_T, check_necessary_periodic_S):
            rep = check(fam, PowerSchedule.arithmetic(1, 1, 12), 1)
            assert not rep.satisfied
            np.testing.assert_allclose([r.value for r in rep.rows], 1.0, atol=1e-10)


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 1.0))
def test_scale_covariance(seed, c):
    fam = random_family(BasisWindow(1), seed)
    op = ShiftOperator(fam, UnitaryOp.identity(fam.window))
    p = projection_P(fam.window, 1)
    sched = PowerSchedule((1, 3, 5))
    base = check_dense_hypercyclicity(op, sched, ApproximantProvider(lambda j, k: (p, p)), 1, 1)
    scaled = check_dense_hypercyclicity(op, sched, ApproximantProvider(lambda j, k: (p * c, p * c)), 1, 1)
    for q in ("forward", "inverse"):
        for j in (-1, 0, 1):
            np.testing.assert_allclose(scaled.series(q, j), c * base.series(q, j), rtol=1e-12)


@given(st.lists(st.floats(0.3, 3.0), min_size=12, max_size=12))
def test_scalar_family_oracle(vals):
    def w(j):
        return vals[j % 12]

    fam = WeightFamily.scalar(W, w, 3.0, 1 / 0.3)
    op = ShiftOperator(fam, UnitaryOp.identity(W))
    sched = PowerSchedule((1, 2, 5, 9))
    rep = check_dense_hypercyclicity(op, sched, ApproximantProvider.constant(W, 1), 1, 1)
    for j in (-1, 0, 1):
        for k, n in sched:
            fwd = math.prod(w(i) for i in range(j + 1, j + n + 1))
            inv = math.prod(1 / w(i) for i in range(j - n + 1, j + 1))
            assert rep.series("forward", j)[k - 1] == pytest.approx(fwd, rel=1e-12)
            assert rep.series("inverse", j)[k - 1] == pytest.approx(inv, rel=1e-12)


@given(st.lists(st.floats(1e-12, 10.0), min_size=4, max_size=12), st.data())
def test_refinement_keeping_tail_never_creates_a_verdict(values, data):
    # dropping schedule positions other than the final three cannot turn a
    # negative verdict into a positive one
    n = len(values)
    drop = data.draw(st.sets(st.integers(0, n - 4)))
    kept = [v for i, v in enumerate(values) if i not in drop]
    before, _ = limit_verdict({"a": values}, 1e-6)
    after, _ = limit_verdict({"a": kept}, 1e-6)
    assert before or not after


def test_refinement_dropping_tail_can_flip():
    # documents the limit of the monotonicity property: the tail rule looks at
    # whatever entries are last, so removing them changes what it inspects
    values = [1e-7, 1e-8, 1e-9, 1e-7]
    assert not limit_verdict({"a": values}, 1e-6)[0]
    assert limit_verdict({"a": values[:3]}, 1e-6)[0]
