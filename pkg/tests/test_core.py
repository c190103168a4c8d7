"""Bound construction: dephasing averages, correlation operator, SLD, QAVAR."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qavar.core import (
    BoundWorkspace,
    JointProbe,
    ProductProbe,
    Scenario,
    build_rho_bar,
    build_rho_prime,
    cost_functional,
    dephasing_weights,
    derivative_factors,
    mc_oracle,
    qavar,
    solve_sld,
)
from qavar.hilbert import ghz_step_state, plus_step_state, product_pure
from qavar.noise import NoiseParams, block_kernel, kernel_set

PAR = NoiseParams(alpha=2.0, beta=0.4, gamma=0.5, omega0=3.25e15)
QUIET = NoiseParams(alpha=0.0, beta=0.0, gamma=0.5, omega0=3.25e15)


def plus_scenario(n_atoms=1, k=1, T=1.0, noise=PAR):
    return Scenario(noise=noise, n_atoms=n_atoms, k=k, T=T,
                    probe=ProductProbe(plus_step_state(n_atoms)))


class TestRhoBar:
    def test_single_step_entrywise(self):
        ks = kernel_set(PAR, 1.0, 1)
        rb = build_rho_bar(plus_scenario()).matrix
        d = 0.5 * np.exp(-0.5 * ks.G[0, 0])
        assert np.allclose(rb, [[0.5, d], [d, 0.5]], atol=1e-15)

    def test_excitation_difference_squared(self):
        # N=2 single step: (0,2) coherence decays 4x faster in the exponent
        ks = kernel_set(PAR, 1.0, 1)
        rb = build_rho_bar(plus_scenario(n_atoms=2)).matrix
        w01 = rb[0, 1] / (0.5 * np.sqrt(0.5))
        w02 = rb[0, 2] / 0.25
        assert w02 == pytest.approx(np.exp(-2.0 * ks.G[0, 0]), rel=1e-12)
        assert w01 == pytest.approx(np.exp(-0.5 * ks.G[0, 0]), rel=1e-12)

    def test_diagonal_preserved(self):
        sc = plus_scenario(n_atoms=2, k=2, T=0.5)
        rb = build_rho_bar(sc)
        rho_in = np.outer(*[product_pure(plus_step_state(2), sc.n_steps)] * 2)
        assert np.allclose(np.diag(rb.matrix), np.diag(rho_in))

    def test_valid_density(self):
        rb = build_rho_bar(plus_scenario(n_atoms=1, k=2, T=0.7))
        rb.validate()  # Hermitian, trace 1, PSD

    def test_stronger_noise_dephases_more(self):
        loud = NoiseParams(alpha=4.0, beta=0.8, gamma=0.5, omega0=3.25e15)
        a = np.abs(build_rho_bar(plus_scenario(k=2, T=0.5)).matrix)
        b = np.abs(build_rho_bar(plus_scenario(k=2, T=0.5, noise=loud)).matrix)
        assert np.all(b <= a + 1e-15)

    def test_zero_noise_identity(self):
        sc = plus_scenario(noise=QUIET, k=2)
        rb = build_rho_bar(sc).matrix
        v = product_pure(plus_step_state(1), sc.n_steps)
        assert np.allclose(rb, np.outer(v, v), atol=1e-15)


class TestRhoPrime:
    def test_single_step_entrywise(self):
        ks = kernel_set(PAR, 1.0, 1)
        sc = plus_scenario()
        rp = build_rho_prime(sc)
        d = 0.5 * np.exp(-0.5 * ks.G[0, 0])
        # [a, b] entry carries i (b - a) H_1
        assert rp[0, 1] == pytest.approx(1j * d * ks.H[0], rel=1e-12)
        assert rp[1, 0] == pytest.approx(-1j * d * ks.H[0], rel=1e-12)
        assert rp[0, 0] == rp[1, 1] == 0.0

    def test_hermitian_traceless(self):
        rp = build_rho_prime(plus_scenario(n_atoms=2, k=2, T=0.4))
        assert np.allclose(rp, rp.conj().T, atol=1e-18)
        assert abs(np.trace(rp)) < 1e-18

    def test_entrywise_envelope(self):
        sc = plus_scenario(n_atoms=2, k=2, T=0.8)
        ks = kernel_set(PAR, 0.8, 2)
        rb = build_rho_bar(sc).matrix
        rp = build_rho_prime(sc)
        envelope = sc.n_atoms * np.abs(ks.H).sum()
        assert np.all(np.abs(rp) <= np.abs(rb) * envelope + 1e-18)


class TestFactorTables:
    def test_weights_symmetric_unit_diagonal(self):
        G = block_kernel(PAR, 0.5, 3)
        W = dephasing_weights(G, 2)
        assert np.allclose(np.diag(W), 1.0)
        assert np.allclose(W, W.T)
        assert np.all((W > 0) & (W <= 1.0 + 1e-15))

    def test_factors_antisymmetric(self):
        ks = kernel_set(PAR, 0.5, 2)
        F = derivative_factors(ks.H, 2)
        assert np.allclose(F, -F.T)

    def test_window_merge_identity(self):
        # two adjacent length-T windows fully correlated in excitation
        # behave as one window of length 2T: the (0,0)-(1,1) coherence
        # weight must match the single-window weight at 2T exactly
        T = 0.8
        W2 = dephasing_weights(block_kernel(PAR, T, 2), 1)
        W1 = dephasing_weights(block_kernel(PAR, 2 * T, 1), 1)
        i00 = 0  # (0, 0)
        i11 = 3  # (1, 1)
        assert W2[i00, i11] == pytest.approx(W1[0, 1], rel=1e-12)


class TestSolveSld:
    def test_residual_small(self):
        sc = plus_scenario(n_atoms=1, k=2, T=0.5)
        rb = build_rho_bar(sc).matrix
        rp = build_rho_prime(sc)
        L = solve_sld(rb, rp)
        resid = 0.5 * (L @ rb + rb @ L) - rp
        assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(rp)
        assert np.allclose(L, L.conj().T, atol=1e-12 * np.abs(L).max())

    def test_trace_route_matches_eigensum(self):
        # Tr(rho_bar L^2)/(2 w0^2) must reproduce the eigenbasis correction sum
        for sc in (plus_scenario(k=2, T=0.5),
                   plus_scenario(n_atoms=2, k=1, T=1.3),
                   Scenario(noise=PAR, n_atoms=2, k=1, T=0.9,
                            probe=ProductProbe(ghz_step_state(2)))):
            res = qavar(sc, want_sld=True)
            rb = build_rho_bar(sc).matrix
            tr_corr = np.trace(rb @ res.sld @ res.sld).real / (2 * PAR.omega0**2)
            assert tr_corr == pytest.approx(res.correction, rel=1e-8)


class TestQavar:
    def test_single_step_closed_form(self):
        sc = plus_scenario()
        ks = kernel_set(PAR, 1.0, 1)
        res = qavar(sc)
        want = ks.sigma2_lo - np.exp(-ks.G[0, 0]) * ks.H[0] ** 2 / (2 * PAR.omega0**2)
        assert res.sigma2_q == pytest.approx(want, rel=1e-10)
        assert res.sigma2_lo == ks.sigma2_lo
        assert res.correction == pytest.approx(res.sigma2_lo - res.sigma2_q, rel=1e-12)

    def test_bounds_sandwich(self):
        for sc in (plus_scenario(), plus_scenario(n_atoms=2, k=2, T=0.4),
                   plus_scenario(k=3, T=0.3)):
            res = qavar(sc)
            assert 0.0 <= res.sigma2_q <= res.sigma2_lo

    def test_zero_noise_bound_is_zero(self):
        res = qavar(plus_scenario(noise=QUIET, k=2, T=0.5))
        assert res.sigma2_lo == 0.0
        assert res.sigma2_q == pytest.approx(0.0, abs=1e-45)

    def test_joint_probe_vector_matches_product(self):
        sc = plus_scenario(k=2, T=0.5)
        v = product_pure(plus_step_state(1), sc.n_steps)
        sc_joint = Scenario(noise=PAR, n_atoms=1, k=2, T=0.5,
                            probe=JointProbe(vector=v))
        assert qavar(sc_joint).sigma2_q == pytest.approx(
            qavar(sc).sigma2_q, rel=1e-14
        )

    def test_joint_probe_density_matches_vector(self):
        v = product_pure(plus_step_state(1), 3)
        rho = np.outer(v, v.conj())
        a = qavar(Scenario(noise=PAR, n_atoms=1, k=2, T=0.5,
                           probe=JointProbe(vector=v)))
        b = qavar(Scenario(noise=PAR, n_atoms=1, k=2, T=0.5,
                           probe=JointProbe(density=rho)))
        assert a.sigma2_q == pytest.approx(b.sigma2_q, rel=1e-12)

    def test_phase_twist_invariance(self):
        # per-step excitation-phase rotations commute with the dephasing
        # channel and with the generator, so the bound cannot move
        sc = plus_scenario(n_atoms=2, k=2, T=0.6)
        base = qavar(sc).sigma2_q
        rng = np.random.default_rng(4)
        A = np.arange(3)  # excitation numbers per step, N=2
        v = product_pure(plus_step_state(2), sc.n_steps)
        phis = rng.uniform(0, 2 * np.pi, size=sc.n_steps)
        phase = np.ones(1)
        for phi in phis:
            phase = np.kron(phase, np.exp(1j * phi * A))
        twisted = qavar(Scenario(noise=PAR, n_atoms=2, k=2, T=0.6,
                                 probe=JointProbe(vector=phase * v)))
        assert twisted.sigma2_q == pytest.approx(base, rel=1e-12)

    def test_conjugation_symmetry(self):
        # complex-conjugate inputs give the same bound
        rng = np.random.default_rng(7)
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        v /= np.linalg.norm(v)
        a = qavar(Scenario(noise=PAR, n_atoms=1, k=2, T=0.5,
                           probe=JointProbe(vector=v)))
        b = qavar(Scenario(noise=PAR, n_atoms=1, k=2, T=0.5,
                           probe=JointProbe(vector=v.conj())))
        assert a.sigma2_q == pytest.approx(b.sigma2_q, rel=1e-12)

    def test_probe_validation(self):
        with pytest.raises(ValueError, match="exactly one"):
            JointProbe()
        with pytest.raises(ValueError, match="normalized"):
            qavar(Scenario(noise=PAR, n_atoms=1, k=1, T=1.0,
                           probe=JointProbe(vector=np.array([1.0, 1.0]))))
        with pytest.raises(ValueError, match="Hermitian"):
            qavar(Scenario(noise=PAR, n_atoms=1, k=1, T=1.0,
                           probe=JointProbe(density=np.array([[0.5, 0.4],
                                                              [0.0, 0.5]]))))
        with pytest.raises(ValueError, match="trace"):
            qavar(Scenario(noise=PAR, n_atoms=1, k=1, T=1.0,
                           probe=JointProbe(density=np.eye(2))))
        with pytest.raises(ValueError, match="atoms"):
            qavar(Scenario(noise=PAR, n_atoms=2, k=1, T=1.0,
                           probe=ProductProbe(plus_step_state(1))))


@settings(max_examples=20, deadline=None)
@given(
    alpha=st.floats(0.0, 4.0),
    beta=st.floats(0.0, 1.0),
    gamma=st.floats(0.1, 2.0),
    T=st.floats(0.1, 2.0),
    k=st.integers(1, 2),
    seed=st.integers(0, 2**31),
)
def test_bound_sandwich_property(alpha, beta, gamma, T, k, seed):
    """0 <= sigma2_q <= sigma2_lo for random pure inputs."""
    noise = NoiseParams(alpha=alpha, beta=beta, gamma=gamma, omega0=3.25e15)
    rng = np.random.default_rng(seed)
    dim = 2 ** (2 * k - 1)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    res = qavar(Scenario(noise=noise, n_atoms=1, k=k, T=T,
                         probe=JointProbe(vector=v)))
    slack = 1e-12 * max(res.sigma2_lo, 1e-300)
    assert -slack <= res.sigma2_q <= res.sigma2_lo + slack


class TestCostFunctional:
    def test_parabola_through_known_points(self):
        sc = plus_scenario(k=2, T=0.5)
        res = qavar(sc, want_sld=True)
        rho_in = np.outer(*[product_pure(plus_step_state(1), sc.n_steps)] * 2)
        L = res.sld
        zero = np.zeros_like(L)
        assert cost_functional(rho_in, zero, sc) == pytest.approx(res.sigma2_lo, rel=1e-12)
        assert cost_functional(rho_in, L, sc) == pytest.approx(res.sigma2_q, rel=1e-10)
        assert cost_functional(rho_in, 2.0 * L, sc) == pytest.approx(res.sigma2_lo, rel=1e-10)

    def test_upper_bounds_qavar(self):
        sc = plus_scenario(k=2, T=0.5)
        res = qavar(sc, want_sld=True)
        rho_in = np.outer(*[product_pure(plus_step_state(1), sc.n_steps)] * 2)
        for scale in (-0.5, 0.3, 0.9, 1.5):
            c = cost_functional(rho_in, scale * res.sld, sc)
            assert c >= res.sigma2_q - 1e-12 * res.sigma2_lo


class TestMcOracle:
    def test_zero_noise_exact(self):
        sc = plus_scenario(noise=QUIET, k=1)
        out = mc_oracle(sc, n_samples=100, seed=0)
        v = plus_step_state(1).amplitudes
        assert np.allclose(out.rho_bar, np.outer(v, v), atol=1e-15)
        assert np.allclose(out.rho_prime, 0.0, atol=1e-18)
        assert np.allclose(out.rho_bar_se, 0.0, atol=1e-15)

    def test_deterministic(self):
        sc = plus_scenario(k=1)
        a = mc_oracle(sc, n_samples=500, seed=11)
        b = mc_oracle(sc, n_samples=500, seed=11)
        assert np.array_equal(a.rho_bar, b.rho_bar)
        assert np.array_equal(a.rho_prime_se, b.rho_prime_se)

    def test_chunking_invariant(self):
        sc = plus_scenario(k=1)
        a = mc_oracle(sc, n_samples=1000, seed=3, chunk=64)
        b = mc_oracle(sc, n_samples=1000, seed=3, chunk=1000)
        assert np.allclose(a.rho_bar, b.rho_bar, atol=1e-14)
        assert np.allclose(a.rho_prime, b.rho_prime, atol=1e-14)

    def test_matches_exact_within_5_se(self):
        sc = plus_scenario(n_atoms=1, k=2, T=0.8)
        out = mc_oracle(sc, n_samples=60_000, seed=5)
        rb = build_rho_bar(sc).matrix
        rp = build_rho_prime(sc)
        for exact, mc, se in ((rb, out.rho_bar, out.rho_bar_se),
                              (rp, out.rho_prime, out.rho_prime_se)):
            dre = np.abs(mc.real - exact.real)
            dim_ = np.abs(mc.imag - exact.imag)
            assert np.all(dre <= 5.0 * se.real + 1e-12)
            assert np.all(dim_ <= 5.0 * se.imag + 1e-12)

    def test_se_scales_with_samples(self):
        sc = plus_scenario(k=1)
        small = mc_oracle(sc, n_samples=1000, seed=2)
        large = mc_oracle(sc, n_samples=16_000, seed=2)
        ratio = small.rho_bar_se.real[0, 1] / large.rho_bar_se.real[0, 1]
        assert ratio == pytest.approx(4.0, rel=0.25)

    def test_rejects_tiny_sample_count(self):
        with pytest.raises(ValueError):
            mc_oracle(plus_scenario(), n_samples=1, seed=0)


class TestWorkspaceReuse:
    def test_matches_one_shot(self):
        ws = BoundWorkspace(PAR, 1, 2, 0.5)
        v = product_pure(plus_step_state(1), 3)
        r1 = ws.evaluate(v)
        r2 = qavar(plus_scenario(k=2, T=0.5))
        assert r1.sigma2_q == pytest.approx(r2.sigma2_q, rel=1e-14)

    def test_rejects_wrong_shape(self):
        ws = BoundWorkspace(PAR, 1, 2, 0.5)
        with pytest.raises(ValueError, match="shape"):
            ws.evaluate(np.eye(4))
