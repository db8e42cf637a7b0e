import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from ttsplit.experiments import smooth_tt_curve
from ttsplit.integrator import (
    ExplicitIncrement,
    LinearVectorField,
    StepConfig,
    TensorCurve,
    VectorField,
    integrate,
    retract,
    solve_local_K,
    solve_local_S,
    step_order1,
    step_order2,
)
from ttsplit.ortho import right_orthogonalize
from ttsplit.tangent import build_frame, project
from ttsplit.tt_core import TTOperator, TTSum, apply, from_dense, kron_dense, operator_to_dense, random_tt, rank_one

from oracles import apply_left, apply_right, left_projector, matrix_ksl, right_projector


def dense(X):
    return X.to_dense().data


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


DIMS, RANKS = (3, 4, 4, 3), (1, 2, 3, 2, 1)


@pytest.mark.parametrize("stepper", [step_order1, step_order2])
def test_zero_increment_keeps_dense_form(rng, stepper):
    X = random_tt(DIMS, RANKS, rng)
    Y0 = right_orthogonalize(X)
    Y, _ = stepper(Y0, ExplicitIncrement(np.zeros(DIMS)), 0.0, 0.1)
    assert rel(dense(Y), dense(X)) <= 1e-13
    Y, _ = stepper(Y0, ExplicitIncrement(TTSum([(0.0, X)])), 0.0, 0.1)
    assert rel(dense(Y), dense(X)) <= 1e-13


def test_orientation_and_substep_counts(rng):
    Y0 = right_orthogonalize(random_tt(DIMS, RANKS, rng))
    dA = rng.standard_normal(DIMS) * 1e-2
    Y1, rep1 = step_order1(Y0, ExplicitIncrement(dA), 0.0, 0.1)
    Y2, rep2 = step_order2(Y0, ExplicitIncrement(dA), 0.0, 0.1)
    d = len(DIMS)
    assert Y1.center == d and rep1.count == 2 * d - 1
    assert Y2.center == 0 and rep2.count == 4 * d - 3
    assert Y1.ranks == Y2.ranks == RANKS
    assert rep1.max_qr_residual < 1e-13 and rep2.max_cond_S >= 1.0
    with pytest.raises(ValueError):
        step_order1(Y1, ExplicitIncrement(dA), 0.0, 0.1)


@pytest.mark.parametrize("stepper", [step_order1, step_order2])
def test_exact_on_rank_exact_curve(rng, stepper):
    A = smooth_tt_curve(DIMS, RANKS, rng)
    Y, _ = stepper(right_orthogonalize(A(0.0)), TensorCurve(A), 0.0, 0.1)
    assert rel(dense(Y), dense(A(0.1))) <= 1e-10
    # the same curve given densely
    Y, _ = stepper(right_orthogonalize(A(0.0)), TensorCurve(lambda t: dense(A(t))), 0.0, 0.1)
    assert rel(dense(Y), dense(A(0.1))) <= 1e-10


def test_matrix_case_matches_ksl(rng):
    for _ in range(5):
        X = random_tt((6, 5), (1, 3, 1), rng)
        Y0 = right_orthogonalize(X)
        dA = 0.3 * rng.standard_normal((6, 5))
        Y, _ = step_order1(Y0, ExplicitIncrement(dA), 0.0, 1.0)
        U, s, Vt = np.linalg.svd(dense(X), full_matrices=False)
        ref = matrix_ksl(U[:, :3], np.diag(s[:3]), Vt[:3].T, dA)
        assert np.linalg.norm(dense(Y) - ref) <= 1e-12 * np.linalg.norm(ref)


def _dense_sweep_oracle(X, dA, ranks):
    """First-order sweep with materialized projectors taken at the current iterate."""
    Y = dense(X)
    d = Y.ndim
    for i in range(1, d + 1):
        f = build_frame(from_dense(Y, rank_cap=list(ranks)))
        Pl = left_projector(f.left, i - 1)
        Pr = right_projector(f.right, i + 1)
        Y = Y + apply_right(Pr, apply_left(Pl, dA, i, True), i)
        if i < d:
            f = build_frame(from_dense(Y, rank_cap=list(ranks)))
            Pl = left_projector(f.left, i)
            Pr = right_projector(f.right, i + 1)
            Y = Y - apply_right(Pr, apply_left(Pl, dA, i, False), i)
    return Y


def test_substep_closed_forms_against_dense_projectors(rng):
    dims, ranks = (2, 3, 3, 2), (1, 2, 3, 2, 1)
    X = random_tt(dims, ranks, rng)
    dA = 0.05 * rng.standard_normal(dims)
    Y, _ = step_order1(right_orthogonalize(X), ExplicitIncrement(dA), 0.0, 1.0)
    ref = _dense_sweep_oracle(X, dA, ranks)
    assert np.linalg.norm(dense(Y) - ref) <= 1e-11 * np.linalg.norm(ref)


def test_time_symmetry_of_order2(rng):
    C = rng.standard_normal(DIMS)
    X = random_tt(DIMS, RANKS, rng)
    A = lambda t: dense(X) + np.sin(t) * C
    Y0 = right_orthogonalize(X)
    Y1, _ = step_order2(Y0, TensorCurve(A), 0.0, 0.05)
    Y2, _ = step_order2(Y1, TensorCurve(A), 0.05, 0.0)
    assert rel(dense(Y2), dense(X)) <= 1e-10
    # order one is not symmetric: the same round trip leaves an O(h^2) defect
    Z1, _ = step_order1(Y0, TensorCurve(A), 0.0, 0.05)
    Z2, _ = step_order1(right_orthogonalize(Z1.to_tt()), TensorCurve(A), 0.05, 0.0)
    assert rel(dense(Z2), dense(X)) > 1e-8


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), scale=st.floats(1e-3, 1.0))
def test_no_substep_moves_more_than_increment(seed, scale):
    rng = np.random.default_rng(seed)
    X = random_tt(DIMS, RANKS, rng)
    dA = scale * rng.standard_normal(DIMS)
    Y, rep = step_order1(right_orthogonalize(X), ExplicitIncrement(dA), 0.0, 1.0)
    nd = np.linalg.norm(dA)
    assert all(s.change <= nd * (1 + 1e-12) for s in rep.substeps)
    assert Y.ranks == RANKS


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_step_preserves_ranks_order2(seed):
    rng = np.random.default_rng(seed)
    X = random_tt(DIMS, RANKS, rng, complex=True)
    dA = rng.standard_normal(DIMS) + 1j * rng.standard_normal(DIMS)
    Y, _ = step_order2(right_orthogonalize(X), ExplicitIncrement(dA), 0.0, 1.0)
    assert Y.ranks == RANKS and Y.center == 0


# --- local solves -------------------------------------------------------------


def _scaled_identity_field(dims, alpha):
    return LinearVectorField(TTOperator.identity(dims) * alpha)


@pytest.mark.parametrize("solver", ["krylov_expm", "rk4"])
def test_local_solves_scalar_exponential(rng, solver):
    X = random_tt(DIMS, RANKS, rng)
    f = build_frame(X)
    alpha, h = 0.7, 0.1
    F = _scaled_identity_field(DIMS, alpha)
    cfg = StepConfig(local_solver=solver, substep_rk_steps=20, local_tol=1e-12)
    K0 = rng.standard_normal((2, 4, 3))
    S0 = rng.standard_normal((3, 3))
    K, _ = solve_local_K(f, 2, F, K0, 0.0, h, cfg)
    S, _ = solve_local_S(f, 2, F, S0, 0.0, h, cfg)
    tol = 1e-12 if solver == "krylov_expm" else 1e-10
    assert np.allclose(K, np.exp(alpha * h) * K0, rtol=tol, atol=0)
    assert np.allclose(S, np.exp(-alpha * h) * S0, rtol=tol, atol=0)


def test_local_solves_zero_field(rng):
    X = random_tt(DIMS, RANKS, rng)
    f = build_frame(X)
    F = VectorField(lambda t, Y: TTSum([(0.0, Y)]))
    K0 = rng.standard_normal((2, 4, 3))
    K, _ = solve_local_K(f, 2, F, K0, 0.0, 0.3)
    S, _ = solve_local_S(f, 3, F, np.eye(2), 0.0, 0.3)
    assert np.array_equal(K, K0) and np.array_equal(S, np.eye(2))


def test_solver_configuration_errors(rng):
    Y0 = right_orthogonalize(random_tt(DIMS, RANKS, rng))
    F = _scaled_identity_field(DIMS, 1.0)
    with pytest.raises(ValueError):
        step_order2(Y0, F, 0.0, 0.1, StepConfig(local_solver="closed_form"))
    with pytest.raises(ValueError):
        step_order2(Y0, ExplicitIncrement(np.zeros(DIMS)), 0.0, 0.1, StepConfig(local_solver="rk4"))
    with pytest.raises(ValueError):
        step_order2(Y0, VectorField(lambda t, Y: Y), 0.0, 0.1, StepConfig(local_solver="krylov_expm"))
    with pytest.raises(ValueError):
        StepConfig(order=3)


def _kron_sum(mats):
    eyes = [np.eye(m.shape[0]) for m in mats]
    return sum(kron_dense(eyes[:k] + [m] + eyes[k + 1 :]) for k, m in enumerate(mats))


def _kron_sum_operator(mats):
    """MPO of ``sum_k I (x) .. (x) A_k (x) .. (x) I`` with bond dimension 2."""
    d = len(mats)
    cores = []
    for k, A in enumerate(mats):
        n = A.shape[0]
        W = np.zeros((2, n, n, 2))
        W[0, :, :, 0] = np.eye(n)
        W[0, :, :, 1] = A
        W[1, :, :, 1] = np.eye(n)
        if k == 0:
            W = W[0:1]
        if k == d - 1:
            W = W[..., 1:2]
        cores.append(W)
    return TTOperator(cores)


def test_linear_field_exact_for_separable_flow(rng):
    mats = [rng.standard_normal((n, n)) for n in (3, 4, 3)]
    H = _kron_sum_operator(mats)
    assert np.allclose(operator_to_dense(H), _kron_sum(mats))
    vs = [rng.standard_normal(n) for n in (3, 4, 3)]
    Y0 = rank_one(vs)
    h = 0.2
    for solver in ("krylov_expm",):
        Y = integrate(Y0, LinearVectorField(H), 0.0, h, 1, StepConfig(local_solver=solver, local_tol=1e-12))
        ref = dense(rank_one([expm(h * A) @ v for A, v in zip(mats, vs)]))
        assert rel(dense(Y), ref) <= 1e-10


def _projected_reference(Y0, L, ranks, h, steps):
    """RK4 on the projected dense equation ``Y' = P(Y) L Y``."""
    dims = Y0.shape

    def f(Y):
        frame = build_frame(from_dense(Y, rank_cap=list(ranks)))
        LY = (L @ Y.ravel(order="F")).reshape(dims, order="F")
        return project(frame, LY).to_dense().data

    Y, dt = Y0.copy(), h / steps
    for _ in range(steps):
        k1 = f(Y)
        k2 = f(Y + dt / 2 * k1)
        k3 = f(Y + dt / 2 * k2)
        k4 = f(Y + dt * k3)
        Y = Y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return Y


def test_linear_field_local_error_is_third_order(rng):
    dims, ranks = (4, 4), (1, 2, 1)
    L = rng.standard_normal((16, 16)) / 4
    from ttsplit.tt_core import operator_from_dense

    op = operator_from_dense(L, dims, dims)
    X = random_tt(dims, ranks, rng)
    errs = []
    for h in (0.1, 0.05):
        Y = integrate(X, LinearVectorField(op), 0.0, h, 1, StepConfig(order=2, local_tol=1e-13))
        ref = _projected_reference(dense(X), L, ranks, h, 100)
        errs.append(np.linalg.norm(dense(Y) - ref))
    assert errs[0] / errs[1] > 6.0


def test_rk4_and_krylov_agree_for_linear_field(rng):
    dims, ranks = (3, 3, 3), (1, 2, 2, 1)
    mats = [rng.standard_normal((3, 3)) for _ in range(3)]
    H = _kron_sum_operator(mats)
    coupling = TTOperator([rng.standard_normal((1, 3, 3, 1)) * 0.3 for _ in range(3)])
    op = H + coupling
    X = random_tt(dims, ranks, rng)
    const = random_tt(dims, (1, 1, 1, 1), rng)
    F = LinearVectorField(op, const)
    a = integrate(X, F, 0.0, 0.05, 1, StepConfig(local_solver="krylov_expm", local_tol=1e-13))
    b = integrate(X, F, 0.0, 0.05, 1, StepConfig(local_solver="rk4", substep_rk_steps=50))
    c = integrate(X, VectorField(lambda t, Y: TTSum([(1.0, apply(op, Y)), (1.0, const)])), 0.0, 0.05, 1,
                  StepConfig(local_solver="rk4", substep_rk_steps=50))
    assert rel(dense(a), dense(b)) <= 1e-10
    assert rel(dense(b), dense(c)) <= 1e-12


def test_integrate_callback(rng):
    A = smooth_tt_curve(DIMS, RANKS, rng)
    seen = []
    Y = integrate(A(0.0), TensorCurve(A), 0.0, 0.2, 4, StepConfig(order=1),
                  callback=lambda k, t, Y, rep: seen.append((k, t, Y.center)))
    assert [s[0] for s in seen] == [1, 2, 3, 4]
    assert np.isclose(seen[-1][1], 0.2) and all(s[2] == 0 for s in seen)
    assert rel(dense(Y), dense(A(0.2))) <= 1e-10


# --- retraction ---------------------------------------------------------------


def test_retract_zero(rng):
    Z = random_tt(DIMS, RANKS, rng)
    assert rel(dense(retract(Z, np.zeros(DIMS))), dense(Z)) <= 1e-13


def test_retract_second_order_on_tangent_directions(rng):
    Z = random_tt(DIMS, RANKS, rng)
    f = build_frame(Z)
    D = project(f, rng.standard_normal(DIMS)).to_dense().data
    D /= np.linalg.norm(D)
    defects = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        R = dense(retract(Z, eps * D))
        defects.append(np.linalg.norm(R - dense(Z) - eps * D))
    assert 3.0 < defects[0] / defects[1] < 5.0
    assert 3.0 < defects[1] / defects[2] < 5.0


def test_retract_order1_exact_when_target_in_manifold(rng):
    from ttsplit.ortho import round_tt

    Z = random_tt(DIMS, RANKS, rng)
    W = round_tt(Z + 0.1 * random_tt(DIMS, RANKS, rng), max_rank=list(RANKS[1:-1]))
    delta = TTSum([(1.0, W), (-1.0, Z)])
    assert rel(dense(retract(Z, delta, StepConfig(order=1))), dense(W)) <= 1e-10
    # the symmetric step also visits Z + delta / 2, which is off the manifold here
    assert rel(dense(retract(Z, delta)), dense(W)) <= 1e-2


def test_retract_order2_exact_along_rank_exact_segment(rng):
    Z = random_tt(DIMS, RANKS, rng)
    cores = list(Z.cores)
    cores[1] = cores[1] + 0.3 * rng.standard_normal(cores[1].shape)
    W = type(Z)(cores)
    # Z + t (W - Z) only changes the second core, so the whole segment has ranks RANKS
    delta = TTSum([(1.0, W), (-1.0, Z)])
    assert rel(dense(retract(Z, delta)), dense(W)) <= 1e-10
    assert rel(dense(retract(Z, dense(W) - dense(Z))), dense(W)) <= 1e-10


def test_small_singular_value_robustness():
    from ttsplit.experiments import run_robustness

    res = run_robustness((4, 4, 4), (1, 3, 3, 1), small_sv=1e-8, steps=(8, 16, 32), seed=1)
    for order in (1, 2):
        for a, b in zip(res["small"][order], res["reference"][order]):
            assert max(a / b, b / a) < 10.0
