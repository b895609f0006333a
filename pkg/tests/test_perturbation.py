"""Tests for the perturbed dynamics, Dyson series, and transgression."""

import math

import numpy as np
import pytest
import scipy.linalg

from skmslab.dynamics import GradedSystem, heisenberg_flow, superderivation
from skmslab.errors import ParityViolation, TruncationUnreachable
from skmslab.graded import as_matrix, graded_commutator
from skmslab.kernels import chain_integral, gauss_legendre_01
from skmslab.perturbation import (
    OddPerturbation,
    PerturbedContext,
    boundary_of_transgression,
    dyson_alpha,
    dyson_alpha_info,
    dyson_gamma_one,
    dyson_gamma_one_info,
    endpoint_transgression_check,
    error_term,
    f_identities_check,
    flow_r,
    F_r_eval,
    gamma_cocycle_oracle,
    gamma_flow_oracle,
    homotopy_check,
    lemma43_check,
    lemma44_check,
    lipschitz_check,
    perturbed_cochain,
    perturbed_functional,
    perturbed_superderivation,
    skms_check_perturbed,
    tau_r_eval,
    transgression_G,
    witten_invariance_check,
)
from skmslab.report import DOCUMENTED
from skmslab.cochain import tau_eval


def block_system(p, q, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    d = p + q
    m = rng.standard_normal((q, p)) + 1j * rng.standard_normal((q, p))
    q0 = np.zeros((d, d), dtype=complex)
    q0[:p, p:] = m.conj().T
    q0[p:, :p] = m
    q0 *= scale / np.linalg.norm(q0, 2)
    return GradedSystem(np.diag([1.0] * p + [-1.0] * q), q0)


def odd_perturbation(sys_, seed=100, scale=0.4):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((sys_.dim, sys_.dim)) + 1j * rng.standard_normal(
        (sys_.dim, sys_.dim))
    m = (m - sys_.grading.conjugate(m)) / 2
    m = (m + m.conj().T) / 2
    m *= scale / np.linalg.norm(m, 2)
    return OddPerturbation(m, sys_.grading)


def make_ctx(r=0.7, p=3, q=2, seed=0, scale=1.0, pert_scale=0.4):
    sys_ = block_system(p, q, seed=seed, scale=scale)
    pert = odd_perturbation(sys_, scale=pert_scale)
    return PerturbedContext(sys_, pert, r)


def even_tuple(sys_, rng, count):
    return [as_matrix(sys_.random_element(rng, parity="even")) for _ in range(count)]


def test_odd_perturbation_validation():
    sys_ = block_system(3, 2)
    with pytest.raises(ValueError, match="grading"):
        OddPerturbation(np.zeros((5, 5)))
    with pytest.raises(ParityViolation, match="odd"):
        OddPerturbation(np.eye(5), sys_.grading)
    odd = np.zeros((5, 5), dtype=complex)
    odd[0, 3] = 1j
    with pytest.raises(ParityViolation, match="selfadjoint"):
        OddPerturbation(odd, sys_.grading)
    pert = odd_perturbation(sys_, scale=0.5)
    assert pert.norm == pytest.approx(0.5, rel=1e-12)
    # zero is a legal (trivial) perturbation
    OddPerturbation(np.zeros((5, 5)), sys_.grading)


def test_context_hamiltonian_is_squared_supercharge():
    ctx = make_ctx(r=0.7)
    q_total = ctx.system.supercharge + ctx.r * ctx.perturbation.matrix
    np.testing.assert_allclose(ctx.h_r, q_total @ q_total, atol=1e-13)
    np.testing.assert_allclose(
        ctx.a_r,
        ctx.r * ctx.delta_q + ctx.r ** 2 * ctx.q_squared,
        atol=1e-14)
    ctx0 = PerturbedContext(ctx.system, ctx.perturbation, 0.0)
    np.testing.assert_allclose(ctx0.h_r, ctx.system.hamiltonian, atol=1e-15)


def test_tail_bound_matches_exponential_remainder():
    ctx = make_ctx()
    y = 2.0 * 0.8 * ctx.a_norm
    partial = sum(y ** n / math.factorial(n) for n in range(5))
    want = math.exp(y) - partial
    assert ctx.tail_bound(0.8, 4) == pytest.approx(want, rel=1e-12)
    assert ctx.tail_bound(0.0, 0) == 0.0
    assert ctx.tail_bound(0.8, 4, norm_x=3.0) == pytest.approx(3 * want, rel=1e-12)


def test_choose_order_minimality_and_cap():
    ctx = make_ctx()
    order = ctx.choose_order(1.0, 1e-10)
    assert ctx.tail_bound(1.0, order) <= 1e-10
    if order > 0:
        assert ctx.tail_bound(1.0, order - 1) > 1e-10
    with pytest.raises(TruncationUnreachable):
        ctx.choose_order(60.0, 1e-10)


def test_flow_r_matches_expm():
    ctx = make_ctx(r=0.9)
    x = as_matrix(ctx.system.random_element(np.random.default_rng(1)))
    assert flow_r(ctx, x, 0.0) is x
    for z in (0.6, 0.3 + 0.4j):
        u = scipy.linalg.expm(1j * z * ctx.h_r)
        want = u @ x @ scipy.linalg.expm(-1j * z * ctx.h_r)
        np.testing.assert_allclose(flow_r(ctx, x, z), want, atol=1e-12)


def test_gamma_oracles():
    ctx = make_ctx(r=0.8)
    np.testing.assert_array_equal(gamma_cocycle_oracle(ctx, 0.0), np.eye(5))
    for t in (0.7, 1j):
        want = scipy.linalg.expm(1j * t * ctx.h_r) @ scipy.linalg.expm(
            -1j * t * ctx.system.hamiltonian)
        np.testing.assert_allclose(gamma_cocycle_oracle(ctx, t), want, atol=1e-12)
    # real t gives a unitary
    g = gamma_cocycle_oracle(ctx, 0.7)
    np.testing.assert_allclose(g.conj().T @ g, np.eye(5), atol=1e-13)
    # gamma^r_t(x) = gamma^r_t(1) alpha_t(x)
    x = as_matrix(ctx.system.random_element(np.random.default_rng(2)))
    want_x = gamma_cocycle_oracle(ctx, 0.7) @ as_matrix(
        heisenberg_flow(ctx.system, x, 0.7))
    np.testing.assert_allclose(gamma_flow_oracle(ctx, x, 0.7), want_x, atol=1e-12)


def test_perturbed_superderivation():
    ctx = make_ctx(r=0.5)
    x = ctx.system.random_element(np.random.default_rng(3))
    want = as_matrix(superderivation(ctx.system, x)) + 0.5 * as_matrix(
        graded_commutator(ctx.perturbation.matrix, x, ctx.system.grading))
    np.testing.assert_allclose(
        as_matrix(perturbed_superderivation(ctx, x)), want, atol=1e-14)
    # squares to [H_r, .] on the algebra
    dd = perturbed_superderivation(ctx, perturbed_superderivation(ctx, x))
    comm = ctx.h_r @ as_matrix(x) - as_matrix(x) @ ctx.h_r
    np.testing.assert_allclose(as_matrix(dd), comm, atol=1e-12)


def test_dyson_alpha_against_oracle():
    ctx = make_ctx(r=0.7, pert_scale=0.4)
    x = as_matrix(ctx.system.random_element(np.random.default_rng(4)))
    for t in (0.3, 1.0, -0.8):
        got, info = dyson_alpha_info(ctx, x, t, tol=1e-10)
        want = as_matrix(flow_r(ctx, x, t))
        err = np.linalg.norm(got - want, 2)
        assert err <= info.tail_bound + 10 * info.quad_error + 1e-12
        assert info.order <= 40


def test_dyson_alpha_fixed_order_improves():
    ctx = make_ctx(r=0.7)
    x = as_matrix(ctx.system.random_element(np.random.default_rng(5)))
    want = as_matrix(flow_r(ctx, x, 1.0))
    errs = []
    for order in (1, 3, 6):
        got = dyson_alpha(ctx, x, 1.0, order=order)
        errs.append(np.linalg.norm(as_matrix(got) - want, 2))
    assert errs[2] < errs[1] < errs[0]
    # trivial cases collapse to the unperturbed flow
    got0 = dyson_alpha(ctx, x, 0.0)
    np.testing.assert_array_equal(as_matrix(got0), x)


def test_dyson_gamma_real_time():
    ctx = make_ctx(r=0.6)
    for t in (0.4, 1.0):
        got, info = dyson_gamma_one_info(ctx, t, tol=1e-10)
        want = gamma_cocycle_oracle(ctx, t)
        assert np.linalg.norm(got - want, 2) <= info.tail_bound + 10 * info.quad_error + 1e-12


def test_dyson_gamma_first_order_term_quadrature():
    # at truncation order 1, gamma(t) = 1 + it int_0^1 alpha_{ts}(a_r) ds
    ctx = make_ctx(r=0.5)
    t = 0.5
    u, w = gauss_legendre_01(24)
    integral = sum(
        wj * as_matrix(heisenberg_flow(ctx.system, ctx.a_r, t * uj))
        for uj, wj in zip(u, w))
    want = np.eye(5) + 1j * t * integral
    got = dyson_gamma_one(ctx, t, order=1)
    assert np.linalg.norm(got - want, 2) < 1e-12


def test_dyson_gamma_imaginary_point():
    ctx = make_ctx(r=0.8, pert_scale=0.3)
    got, info = dyson_gamma_one_info(ctx, 1j, tol=1e-12)
    want = gamma_cocycle_oracle(ctx, 1j)
    assert info.quad_error == 0.0  # chain terms are exact
    assert np.linalg.norm(got - want, 2) <= info.tail_bound + 1e-12
    # first-order term equals -int_0^1 e^{-uH} a e^{uH} du
    u, w = gauss_legendre_01(24)
    h = ctx.system.hamiltonian
    integral = sum(
        wj * (scipy.linalg.expm(-uj * h) @ ctx.a_r @ scipy.linalg.expm(uj * h))
        for uj, wj in zip(u, w))
    got1 = dyson_gamma_one(ctx, 1j, order=1)
    np.testing.assert_allclose(got1, np.eye(5) - integral, atol=1e-10)
    with pytest.raises(ValueError, match="t = i"):
        dyson_gamma_one(ctx, 2j)
    with pytest.raises(ValueError, match="t = i"):
        dyson_gamma_one(ctx, 0.3 + 0.4j)


def test_perturbed_functional_routes_agree():
    ctx = make_ctx(r=0.9, pert_scale=0.3)
    x = as_matrix(ctx.system.random_element(np.random.default_rng(6)))
    heat = scipy.linalg.expm(-ctx.h_r)
    want = np.trace(ctx.system.grading.matrix @ x @ heat) / ctx.system.witten_index
    exact = perturbed_functional(ctx, x, method="exact")
    assert exact == pytest.approx(want, abs=1e-12)
    series = perturbed_functional(ctx, x, method="series", tol=1e-12)
    assert abs(series - exact) < 1e-10
    assert perturbed_functional(ctx, np.eye(5)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        perturbed_functional(ctx, x, method="pade")


def test_error_term_vanishes():
    ctx = make_ctx(r=0.7)
    e0 = error_term(ctx, 0.0)
    assert np.linalg.norm(e0) == 0.0  # exactly zero at t = 0
    for t in (0.3, 1.0):
        assert np.linalg.norm(error_term(ctx, t), 2) < 1e-12


def test_tau_r_reduces_to_tau_at_zero_coupling():
    sys_ = block_system(3, 2, seed=7)
    pert = odd_perturbation(sys_)
    ctx0 = PerturbedContext(sys_, pert, 0.0)
    rng = np.random.default_rng(8)
    xs = even_tuple(sys_, rng, 3)
    a = tau_r_eval(ctx0, 2, xs)
    b = tau_eval(sys_, 2, xs)
    assert a == pytest.approx(b, abs=1e-13)


def test_tau_r_parity_and_degeneracy():
    ctx = make_ctx(r=0.5)
    rng = np.random.default_rng(9)
    xs = even_tuple(ctx.system, rng, 3)
    assert tau_r_eval(ctx, 1, xs[:2]) == 0.0
    assert tau_r_eval(ctx, 2, [xs[0], 2.5 * np.eye(5), xs[2]]) == 0.0
    with pytest.raises(ParityViolation):
        tau_r_eval(ctx, 2, [as_matrix(ctx.system.random_element(rng))] + xs[1:])


def test_transgression_hand_expansion_degree_one():
    # G_1(x0, x1) = F_2(x0, Q, d_r x1) - F_2(x0, d_r x1, Q)
    ctx = make_ctx(r=0.6)
    rng = np.random.default_rng(10)
    xs = even_tuple(ctx.system, rng, 2)
    q = ctx.perturbation.matrix
    dx1 = as_matrix(perturbed_superderivation(ctx, xs[1]))
    want = (F_r_eval(ctx, 2, [xs[0], q, dx1])
            - F_r_eval(ctx, 2, [xs[0], dx1, q]))
    got = transgression_G(ctx, 1, xs)
    assert got == pytest.approx(want, abs=1e-14)
    # even degree returns 0; scalar slots collapse exactly
    assert transgression_G(ctx, 2, xs + [xs[0]]) == 0.0
    assert transgression_G(ctx, 1, [xs[0], -1.5 * np.eye(5)]) == 0.0


def test_F_r_matches_chain_integral():
    ctx = make_ctx(r=0.4)
    rng = np.random.default_rng(11)
    xs = [as_matrix(ctx.system.random_element(rng)) for _ in range(3)]
    want = chain_integral(ctx.spectrum_r, xs, ctx.system.grading) / ctx.system.witten_index
    assert F_r_eval(ctx, 2, xs) == pytest.approx(want, abs=1e-14)
    with pytest.raises(ValueError):
        F_r_eval(ctx, 2, xs[:2])


def test_perturbed_cocycle_identity():
    # (B + b) tau^r = 0 with the perturbed superderivation and heat kernel
    from skmslab.cochain import boundary

    ctx = make_ctx(r=0.8, pert_scale=0.3)
    dtau = boundary(perturbed_cochain(ctx))
    rng = np.random.default_rng(12)
    worst = 0.0
    for n in (1, 3):
        xs = even_tuple(ctx.system, rng, n + 1)
        worst = max(worst, abs(dtau(n, xs)))
    assert worst < 1e-10


def test_lemma43_rows():
    ctx = make_ctx(r=0.5)
    rows = lemma43_check(ctx, samples=8, tol=1e-11, seed=1, model_digest="m")
    assert [r.identity_name for r in rows] == [
        "gamma_r.composition",
        "gamma_r.adjoint_unitarity",
        "alpha_r.conjugation",
        "gamma_r.multiplicativity",
    ]
    for r in rows:
        assert r.passed, (r.identity_name, r.max_residual)


def test_lemma44_rows():
    sys_ = block_system(3, 2, seed=13)
    rows = lemma44_check(sys_, n=2, samples=6, tol=1e-10, seed=2)
    assert [r.identity_name for r in rows] == [
        "flow.cyclic_conjugation",
        "flow.reflection",
    ]
    for r in rows:
        assert r.passed, (r.identity_name, r.max_residual)


def test_perturbed_skms_rows():
    ctx = make_ctx(r=0.5, pert_scale=0.3)
    rows = skms_check_perturbed(ctx, samples=8, tol=1e-9, seed=3)
    names = [r.identity_name for r in rows]
    assert names == [
        "skms_r.hermiticity",
        "skms_r.alpha_invariance",
        "skms_r.gamma_invariance",
        "skms_r.kms_boundary",
        "skms_r.normalization",
        "skms_r.delta_invariance",
        "skms_r.weak_supersymmetry",
        "skms_r.error_term",
        "skms_r.error_term_at_zero",
    ]
    for r in rows:
        assert r.passed, (r.identity_name, r.max_residual)
    at_zero = rows[-1]
    assert at_zero.max_residual == 0.0 and at_zero.tolerance == 0.0


def test_f_identity_rows():
    ctx = make_ctx(r=0.5)
    rows = f_identities_check(ctx, n=2, samples=6, tol=1e-9, seed=4)
    assert [r.identity_name for r in rows] == [
        "F.rotation",
        "F.heat_commutator_inner",
        "F.heat_commutator_last",
        "F.unit_insertion",
        "F.derivation_cycle",
    ]
    for r in rows:
        assert r.passed, (r.identity_name, r.max_residual)


def test_f_identities_at_coupling_extremes():
    for r in (0.0, 1.0):
        ctx = make_ctx(r=r, pert_scale=0.3)
        rows = f_identities_check(ctx, n=2, samples=4, tol=1e-9, seed=5)
        assert all(row.passed for row in rows)


def test_witten_invariance_rows():
    sys_ = block_system(3, 2, seed=14)
    pert = odd_perturbation(sys_)
    rows = witten_invariance_check(sys_, pert, grid=6, tol=1e-10)
    assert [r.identity_name for r in rows] == [
        "witten.invariance", "phi_r.normalization"]
    for r in rows:
        assert r.passed, (r.identity_name, r.max_residual)


def test_lipschitz_rows():
    sys_ = block_system(3, 2, seed=15)
    pert = odd_perturbation(sys_)
    rows = lipschitz_check(sys_, pert, samples=30, seed=6)
    assert rows[0].identity_name == "alpha_r.lipschitz_in_r"
    assert rows[0].max_residual == 0.0
    assert rows[0].passed


def test_homotopy_rows_document_orientation():
    sys_ = block_system(3, 2, seed=16)
    pert = odd_perturbation(sys_, scale=0.4)
    rng = np.random.default_rng(17)
    xs = even_tuple(sys_, rng, 3)
    rows = homotopy_check(sys_, pert, 2, xs, r=0.5)
    by_name = {r.identity_name: r for r in rows}
    orient = by_name["transgression.orientation"]
    # this realization pairs the difference quotient with the negated sum
    assert orient.max_residual == 1.0
    assert orient.tolerance == DOCUMENTED and orient.passed
    assert by_name["transgression.derivative"].tolerance == DOCUMENTED
    assert by_name["transgression.derivative_order"].max_residual == 0.0
    assert by_name["transgression.derivative_order"].passed


def test_homotopy_trivial_perturbation():
    sys_ = block_system(3, 2, seed=18)
    pert = OddPerturbation(np.zeros((5, 5)), sys_.grading)
    rng = np.random.default_rng(19)
    xs = even_tuple(sys_, rng, 3)
    rows = homotopy_check(sys_, pert, 2, xs, r=0.5)
    by_name = {r.identity_name: r for r in rows}
    assert by_name["transgression.orientation"].max_residual == 0.0
    assert by_name["transgression.derivative_order"].max_residual == 0.0


def test_homotopy_step_domain_guard():
    sys_ = block_system(3, 2, seed=20)
    pert = odd_perturbation(sys_)
    xs = even_tuple(sys_, np.random.default_rng(21), 3)
    with pytest.raises(ValueError, match="leaves"):
        homotopy_check(sys_, pert, 2, xs, r=0.005)


def test_endpoint_transgression():
    sys_ = block_system(3, 2, seed=22)
    pert = odd_perturbation(sys_, scale=0.4)
    rng = np.random.default_rng(23)
    xs = even_tuple(sys_, rng, 3)
    rows = endpoint_transgression_check(sys_, pert, 2, xs, nodes=11, tol=1e-6)
    assert rows[0].identity_name == "transgression.endpoint"
    assert rows[0].passed, rows[0].max_residual
    with pytest.raises(ValueError, match="odd node"):
        endpoint_transgression_check(sys_, pert, 2, xs, nodes=10)


def test_boundary_of_transgression_matches_finite_difference():
    # dtau^r/dr tracks -(B G + b G) to second order in the step
    sys_ = block_system(3, 2, seed=24)
    pert = odd_perturbation(sys_, scale=0.4)
    rng = np.random.default_rng(25)
    xs = even_tuple(sys_, rng, 3)
    r, h = 0.5, 1e-4
    up = tau_r_eval(PerturbedContext(sys_, pert, r + h), 2, xs)
    dn = tau_r_eval(PerturbedContext(sys_, pert, r - h), 2, xs)
    fd = (up - dn) / (2 * h)
    bg = boundary_of_transgression(PerturbedContext(sys_, pert, r), 2, xs)
    assert abs(fd + bg) < 1e-6 * max(1.0, abs(bg))
