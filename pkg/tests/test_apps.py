import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttsplit.apps.henon_heiles import (
    HenonHeilesSpec,
    build_henon_heiles,
    cap_profile,
    dense_hamiltonian,
    one_mode_terms,
    propagate,
)
from ttsplit.apps.newton_schultz import NewtonSchultzSpec, feasible_ranks, newton_schultz, residual_norm
from ttsplit.apps.qtt import build_qtt_laplace, laplace_1d, shift_operator
from ttsplit.apps.spectrum import spectrum
from ttsplit.integrator import StepConfig
from ttsplit.tt_core import (
    TTOperator,
    apply,
    inner_tt,
    kron_dense,
    operator_to_dense,
    random_tt,
    rank_one,
)


def tridiag(N):
    return 2 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)


# --- QTT Laplacian ------------------------------------------------------------


def test_shift_operator_dense():
    assert np.array_equal(operator_to_dense(shift_operator(3)), np.eye(8, k=-1))


def test_qtt_laplace_1d_is_tridiagonal():
    assert np.allclose(operator_to_dense(build_qtt_laplace(1, 3)), tridiag(8), atol=1e-13)
    assert np.allclose(operator_to_dense(laplace_1d(3)), tridiag(8))


def test_qtt_laplace_2d_kronecker_sum():
    L = tridiag(8)
    ref = np.kron(np.eye(8), L) + np.kron(L, np.eye(8))
    W = build_qtt_laplace(2, 3)
    assert np.allclose(operator_to_dense(W), ref, atol=1e-12)
    assert max(W.ranks) <= 4


def test_qtt_laplace_rejects_bad_sizes():
    with pytest.raises(ValueError):
        build_qtt_laplace(0, 3)


# --- Henon-Heiles ---------------------------------------------------------------


def small_spec(**kw):
    base = dict(f=2, n=16)
    base.update(kw)
    return HenonHeilesSpec(**base)


def test_spec_validation():
    with pytest.raises(ValueError):
        HenonHeilesSpec(n=4)
    with pytest.raises(ValueError):
        HenonHeilesSpec(b_l=1.5)
    with pytest.raises(ValueError):
        HenonHeilesSpec(domain=(1.0, -1.0))


def test_grid_is_interior_dirichlet():
    q = HenonHeilesSpec(n=13, domain=(-7.0, 7.0)).grid()
    assert np.isclose(q[0], -6.0) and np.isclose(q[-1], 6.0) and q.size == 13


def test_cap_vanishes_inside_and_grows_outside():
    spec = HenonHeilesSpec()
    inside = np.linspace(-6.0, 6.0, 41)
    assert not np.any(cap_profile(inside, spec))
    assert np.isclose(cap_profile(7.0, spec), 1.0) and np.isclose(cap_profile(-8.0, spec), 8.0)


@pytest.mark.parametrize("cap", [False, True])
def test_mpo_matches_dense_assembly(cap):
    spec = small_spec(cap=cap)
    H, psi0 = build_henon_heiles(spec)
    assert max(H.ranks) <= 4
    assert np.allclose(operator_to_dense(H), dense_hamiltonian(spec), atol=1e-12)
    assert np.isclose(psi0.norm(), 1.0) and psi0.ranks == (1, 1, 1)


def test_three_mode_mpo_matches_dense_assembly():
    spec = HenonHeilesSpec(f=3, n=8, cap=True)
    H, _ = build_henon_heiles(spec)
    assert np.allclose(operator_to_dense(H), dense_hamiltonian(spec), atol=1e-12)


def test_harmonic_ground_state_energy():
    spec = small_spec(n=48, lam=0.0)
    E1 = np.linalg.eigvalsh(one_mode_terms(spec)[0])[0]
    E = np.linalg.eigvalsh(dense_hamiltonian(spec).real)[0]
    assert np.isclose(E, 2 * E1, atol=1e-10)
    # second-order finite differences: dx = 14/49, error well below dx^2
    assert abs(E - spec.f / 2) < 0.3 * (14 / 49) ** 2


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_hamiltonian_hermitian_on_random_states(seed):
    rng = np.random.default_rng(seed)
    H, _ = build_henon_heiles(small_spec())
    x = random_tt((16, 16), (1, 3, 1), rng, complex=True)
    y = random_tt((16, 16), (1, 2, 1), rng, complex=True)
    lhs = inner_tt(apply(H, x), y)
    rhs = inner_tt(x, apply(H, y))
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_unitary_norm_conservation():
    H, psi0 = build_henon_heiles(small_spec())
    tr = propagate(H, psi0, T=1.0, h=0.01, ranks=(1, 4, 1))
    assert np.max(np.abs(tr.norms - 1.0)) <= 1e-8
    assert tr.a.shape == (101,) and np.isclose(tr.a[0], 1.0)


def test_cap_norm_non_increasing():
    spec = small_spec(cap=True, center=4.5)
    H, psi0 = build_henon_heiles(spec)
    tr = propagate(H, psi0, T=1.0, h=0.01, ranks=(1, 4, 1))
    assert np.all(np.diff(tr.norms) <= 1e-10)
    assert tr.norms[-1] < tr.norms[0] - 1e-6


def test_eigenstate_autocorrelation_is_a_phase():
    spec = small_spec(lam=0.0)
    H, _ = build_henon_heiles(spec)
    w, V = np.linalg.eigh(one_mode_terms(spec)[0])
    g = V[:, 0].astype(complex)
    psi0 = rank_one([g, g])
    E0 = 2 * w[0]
    tr = propagate(H, psi0, T=0.5, h=0.01, ranks=(1, 1, 1))
    assert np.allclose(tr.a, np.exp(-1j * E0 * tr.t), atol=1e-8)


def test_propagate_rejects_bad_step():
    H, psi0 = build_henon_heiles(small_spec())
    with pytest.raises(ValueError):
        propagate(H, psi0, 1.0, 0.0, (1, 2, 1))


# --- spectrum -----------------------------------------------------------------


def test_single_phase_peak():
    dt, N, w = 0.05, 400, 3.3
    t = dt * np.arange(N)
    s = spectrum(np.exp(-1j * w * t), dt)
    assert abs(s.peaks[0] - w) <= s.bin_width
    assert np.isclose(s.bin_width, 2 * np.pi / (N * dt))


def test_two_phase_peaks():
    dt, N = 0.05, 800
    t = dt * np.arange(N)
    s = spectrum(np.exp(-1j * 2.0 * t) + 0.5 * np.exp(-1j * 5.0 * t), dt, window="cosine", pad=4)
    assert abs(s.peaks[0] - 2.0) <= s.bin_width and abs(s.peaks[1] - 5.0) <= s.bin_width


def test_spectrum_input_checks():
    with pytest.raises(ValueError):
        spectrum(np.ones(5), 0.1)
    with pytest.raises(ValueError):
        spectrum(np.ones(16), 0.1, window="hann")


def test_harmonic_spectrum_near_eigenvalues():
    spec = small_spec(lam=0.0)
    H, psi0 = build_henon_heiles(spec)
    tr = propagate(H, psi0, T=5.0, h=0.01, ranks=(1, 2, 1))
    s = spectrum(tr.a, 0.01)
    e = np.linalg.eigvalsh(one_mode_terms(spec)[0])
    levels = (e[:, None] + e[None, :]).ravel()
    for p in s.peaks[:2]:
        assert np.min(np.abs(levels - p)) <= s.bin_width


# --- Newton-Schultz -----------------------------------------------------------


def test_feasible_ranks():
    assert feasible_ranks([4, 4, 4], 10) == (1, 4, 4, 1)
    assert feasible_ranks([4] * 5, 10) == (1, 4, 10, 10, 4, 1)


def test_ns_spec_validation():
    with pytest.raises(ValueError):
        NewtonSchultzSpec(alpha=0.0)
    with pytest.raises(ValueError):
        NewtonSchultzSpec(retraction="svd")


@pytest.mark.parametrize("retraction", ["splitting", "tt_svd"])
def test_ns_converges_to_exact_inverse(retraction):
    spec = NewtonSchultzSpec(M=1, d=3, r=16, alpha=0.2, retraction=retraction, max_iters=30)
    hist = newton_schultz(spec)
    A = build_qtt_laplace(1, 3)
    assert hist.residuals[-1] * residual_norm(A, TTOperator.identity([2] * 3) * 0.2) <= 1e-10
    assert np.allclose(operator_to_dense(hist.Y), np.linalg.inv(tridiag(8)), atol=1e-9)
    assert not hist.aborted


def test_ns_divergence_aborts():
    hist = newton_schultz(NewtonSchultzSpec(M=1, d=3, r=16, alpha=2.0, max_iters=30))
    assert hist.aborted and hist.residuals[-1] > 1e3


def test_dense_newton_schultz_is_quadratic(rng):
    B = rng.standard_normal((4, 4))
    A = B @ B.T + 4 * np.eye(4)
    Y = np.eye(4) / np.linalg.norm(A, 2)
    res = []
    for _ in range(12):
        res.append(np.linalg.norm(A @ Y - np.eye(4), 2))
        Y = 2 * Y - Y @ A @ Y
    rs = [r for r in res if 1e-12 < r < 0.5]
    logs = [np.log(rs[k + 1]) / np.log(rs[k]) for k in range(len(rs) - 1)]
    assert len(logs) >= 2 and all(abs(x - 2) < 0.1 for x in logs)


def test_ns_records_and_callback():
    seen = []
    hist = newton_schultz(NewtonSchultzSpec(M=1, d=3, r=4, alpha=0.2, max_iters=3), callback=seen.append)
    assert [r.k for r in hist.records] == [0, 1, 2, 3]
    assert len(seen) == 3 and hist.records[0].residual == 1.0
    assert all(r.max_rank <= 4 for r in hist.records)
