import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from cloneqkd.cloner import (
    ClonerParams, OpticalModel, SingularOpticsError, apply_probe_map, bda_settings, bob_eve_state,
    clone_fidelities, filter_transmittances, filtered_output, full_unitary_state, loss_db,
    shrinking_factors, success_probability, traced_unitary_state,
)
from cloneqkd.protocols import alphabet, protocol_state
from cloneqkd.qstate import bloch_vector, density_from_bloch, partial_trace, trace_distance, uhlmann_fidelity
from oracles import fit_shrink, isometry, ptrace_last, random_ket

unit = st.floats(0, 1)
params_st = st.builds(ClonerParams, unit, unit)
A0 = protocol_state("r04", "alice", 0)
A1 = protocol_state("r04", "alice", 1)
IDEAL = OpticalModel.preset("ideal")
MEASURED = OpticalModel.preset("measured")


def swap_modes(rho):
    return rho.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)


class TestParams:
    def test_derived(self):
        c = ClonerParams.from_lambda2(0.3, 0.36)
        assert c.q == pytest.approx(0.7)
        assert c.lam == pytest.approx(0.6)
        assert c.lam_bar == pytest.approx(0.8)

    @pytest.mark.parametrize("p,lam", [(-0.1, 0.5), (0.5, 1.2), (float("nan"), 0.5)])
    def test_range(self, p, lam):
        with pytest.raises(ValueError):
            ClonerParams(p, lam)


class TestShrinking:
    @pytest.mark.parametrize("p,l2", [(0.5, 1 / 3), (0.5, 0.5), (0.8, 0.2)])
    def test_against_unitary_fit(self, p, l2, rng):
        c = ClonerParams.from_lambda2(p, l2)
        for party in ("bob", "eve"):
            eta, eta_perp = fit_shrink(p, math.sqrt(l2), party, rng)
            got = shrinking_factors(c, party)
            assert got.eta == pytest.approx(eta, abs=1e-10)
            assert got.eta_perp == pytest.approx(eta_perp, abs=1e-10)

    def test_optimal_bb84_values(self):
        s = shrinking_factors(ClonerParams.from_lambda2(0.5, 1 / 3))
        assert s.eta == pytest.approx(2 / 3, abs=1e-12)
        assert s.eta_perp == pytest.approx(1 / 3, abs=1e-12)

    def test_pass_through(self):
        s = shrinking_factors(ClonerParams.from_lambda2(1, 0.5))
        assert s.eta == pytest.approx(1) and s.eta_perp == pytest.approx(1)

    def test_symmetric_point(self):
        s = shrinking_factors(ClonerParams.from_lambda2(0.5, 0.5))
        assert s.eta == pytest.approx(1 / math.sqrt(2)) and s.eta_perp == pytest.approx(0.5)

    def test_bad_party(self):
        with pytest.raises(ValueError):
            shrinking_factors(ClonerParams(0.5, 0.5), "alice")

    @given(params_st)
    def test_bounded(self, c):
        for party in ("bob", "eve"):
            s = shrinking_factors(c, party)
            assert abs(s.eta) <= 1 + 1e-12 and abs(s.eta_perp) <= 1 + 1e-12


class TestFidelities:
    def test_bb84_optimum(self):
        assert clone_fidelities(ClonerParams.from_lambda2(0.5, 1 / 3))[0] == pytest.approx(5 / 6, abs=1e-12)

    def test_r04_optimum(self):
        assert clone_fidelities(ClonerParams.from_lambda2(4 / 7, 4 / 11))[0] == pytest.approx(19 / 22, abs=1e-12)

    def test_universal_cloner(self):
        f_b, f_e = clone_fidelities(ClonerParams.from_lambda2(0.5, 2 / 3))
        assert f_b == pytest.approx(5 / 6, abs=1e-12) and f_e == pytest.approx(5 / 6, abs=1e-12)

    def test_swap_identity(self, rng):
        for p, lam in rng.random((100, 2)):
            c = ClonerParams(p, lam)
            assert clone_fidelities(c)[0] == clone_fidelities(c.swapped())[1]

    @given(params_st)
    def test_range(self, c):
        for f in clone_fidelities(c):
            assert 0.5 - 1e-12 <= f <= 1 + 1e-12


class TestProbeMap:
    def test_a0_h_probe(self):
        c = ClonerParams.from_lambda2(0.5, 1 / 3)
        out = apply_probe_map(A0, 0, c)
        # unnormalized output is the state times sqrt(weight)
        assert np.allclose(out.vector * math.sqrt(2), [1, 1, 1, 0] / np.sqrt(3))
        assert out.weight == pytest.approx(0.5)

    def test_basis_input(self):
        c = ClonerParams.from_lambda2(0.3, 0.4)
        out = apply_probe_map([1, 0], 0, c).vector
        assert np.allclose(out, [c.lam, 0, 0, 0])
        out1 = apply_probe_map([1, 0], 1, c).vector
        assert np.allclose(out1, [0, c.lam_bar * math.sqrt(c.p), c.lam_bar * math.sqrt(c.q), 0])

    def test_pass_through_branch(self):
        c = ClonerParams.from_lambda2(1, 0.5)
        out = apply_probe_map(A0, 1, c)
        bob = partial_trace(np.outer(out.state, out.state.conj()), 0)
        assert uhlmann_fidelity(bob, np.outer(A0, A0.conj())) == pytest.approx(1, abs=1e-12)
        assert np.allclose(out.state, np.array([0, 1, 0, 1]) / np.sqrt(2))

    def test_bad_probe(self):
        with pytest.raises(ValueError):
            apply_probe_map(A0, 2, ClonerParams(0.5, 0.5))

    @given(params_st, st.floats(0, 2 * math.pi))
    def test_equatorial_weights(self, c, phase):
        ket = np.array([1, np.exp(1j * phase)]) / math.sqrt(2)
        w = [apply_probe_map(ket, x, c).weight for x in (0, 1)]
        assert w[0] == pytest.approx(0.5, abs=1e-12) and w[1] == pytest.approx(0.5, abs=1e-12)


class TestBobEve:
    def test_r04_reference_state(self):
        rho = bob_eve_state(A1, ClonerParams.from_lambda2(4 / 7, 4 / 11))
        r = bloch_vector(partial_trace(rho, 0))
        assert math.hypot(r[0], r[1]) == pytest.approx(8 / 11, abs=1e-12)
        assert np.trace(rho).real == pytest.approx(1, abs=1e-12)

    def test_pass_through(self):
        rho = bob_eve_state(A0, ClonerParams.from_lambda2(1, 0.5))
        assert uhlmann_fidelity(partial_trace(rho, 0), np.outer(A0, A0.conj())) == pytest.approx(1, abs=1e-12)
        assert np.allclose(bloch_vector(partial_trace(rho, 1))[:2], 0, atol=1e-12)

    def test_symmetric_point(self, rng):
        c = ClonerParams.from_lambda2(0.5, 0.5)
        for phase in rng.uniform(0, 2 * math.pi, 5):
            a = np.array([1, np.exp(1j * phase)]) / math.sqrt(2)
            f = uhlmann_fidelity(partial_trace(bob_eve_state(a, c), 0), np.outer(a, a.conj()))
            assert f == pytest.approx((1 + 1 / math.sqrt(2)) / 2, abs=1e-12)

    def test_unnormalized_input(self):
        with pytest.raises(ValueError):
            bob_eve_state([1, 1], ClonerParams(0.5, 0.5))


class TestFullUnitary:
    def test_zero_transcription(self):
        c = ClonerParams.from_lambda2(0.3, 0.6)
        psi = full_unitary_state([1, 0], c)
        assert psi[0b000] == pytest.approx(c.lam)
        assert psi[0b011] == pytest.approx(c.lam_bar * math.sqrt(c.p))
        assert psi[0b101] == pytest.approx(c.lam_bar * math.sqrt(c.q))

    def test_one_transcription(self):
        c = ClonerParams.from_lambda2(0.3, 0.6)
        psi = full_unitary_state([0, 1], c)
        assert psi[0b111] == pytest.approx(c.lam)
        assert psi[0b100] == pytest.approx(c.lam_bar * math.sqrt(c.p))
        assert psi[0b010] == pytest.approx(c.lam_bar * math.sqrt(c.q))

    def test_matches_oracle_isometry(self, rng):
        for _ in range(20):
            c = ClonerParams(*rng.random(2))
            ket = random_ket(rng)
            assert np.allclose(full_unitary_state(ket, c), isometry(c.p, c.lam) @ ket, atol=1e-14)

    def test_isometry_is_unitary_embedding(self, rng):
        u = isometry(*rng.random(2))
        assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-14)

    def test_trace_equals_mixture(self, rng):
        worst = 0.0
        for _ in range(100):
            c = ClonerParams(*rng.random(2))
            ket = random_ket(rng)
            psi = isometry(c.p, c.lam) @ ket
            oracle = ptrace_last(np.outer(psi, psi.conj()), (4, 2))
            worst = max(worst, trace_distance(bob_eve_state(ket, c), oracle))
            worst = max(worst, trace_distance(traced_unitary_state(ket, c), oracle))
        assert worst <= 1e-10


class TestInvariants:
    @given(params_st)
    @settings(max_examples=20)
    def test_phase_covariance(self, c):
        rng = np.random.default_rng(0)
        fids = []
        for phase in rng.uniform(0, 2 * math.pi, 50):
            a = np.array([1, np.exp(1j * phase)]) / math.sqrt(2)
            fids.append(uhlmann_fidelity(partial_trace(bob_eve_state(a, c), 0), np.outer(a, a.conj())))
        assert np.ptp(fids) <= 1e-10

    @given(params_st, st.floats(0, math.pi), st.floats(-math.pi, math.pi))
    @settings(max_examples=100)
    def test_bob_reduction_is_shrunk_bloch(self, c, theta, phi):
        ket = np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])
        r = bloch_vector(ket)
        s = shrinking_factors(c, "bob")
        expect = density_from_bloch(np.array([s.eta * r[0], s.eta * r[1], s.eta_perp * r[2]]))
        assert np.abs(partial_trace(bob_eve_state(ket, c), 0) - expect).max() <= 1e-10

    @given(params_st, st.floats(0, math.pi), st.floats(-math.pi, math.pi))
    @settings(max_examples=100)
    def test_swap_p_q_swaps_clones(self, c, theta, phi):
        ket = np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])
        a = bob_eve_state(ket, c)
        b = bob_eve_state(ket, c.swapped())
        assert np.abs(partial_trace(a, 0) - partial_trace(b, 1)).max() <= 1e-10
        assert np.abs(partial_trace(a, 1) - partial_trace(b, 0)).max() <= 1e-10


def _tau_oracle(p, l2, mu, nu, probe):
    P, L2, M, N = sp.Rational(p), sp.Rational(l2), sp.Rational(mu), sp.Rational(nu)
    Lb2 = 1 - L2
    if probe == 0:
        bob = L2 / (Lb2 * P) * (1 - M) * (1 - N) / (1 - 2 * M) ** 2
        eve = L2 / (Lb2 * (1 - P)) * M * N / (1 - 2 * M) ** 2
    else:
        bob = Lb2 * (1 - P) / L2 * (2 * N - 1) ** 2 / (2 * (1 - M) * (1 - N))
        eve = Lb2 * P / L2 * (2 * N - 1) ** 2 / (M * N)
    return float(bob), float(eve)


class TestBda:
    @pytest.mark.parametrize("probe", [0, 1])
    def test_measured_optics_against_symbolic(self, probe):
        c = ClonerParams.from_lambda2(0.5, 1 / 3)
        got = bda_settings(c, MEASURED, probe)
        bob, eve = _tau_oracle("1/2", "1/3", "0.77", "0.19", probe)
        assert got.bob == pytest.approx(bob, rel=1e-12)
        assert got.eve == pytest.approx(eve, rel=1e-12)
        assert got.finite

    def test_worked_value(self):
        got = bda_settings(ClonerParams.from_lambda2(0.5, 1 / 3), MEASURED, 0)
        assert got.bob == pytest.approx((1 / 3) / (2 / 3 * 0.5) * 0.23 * 0.81 / 0.54**2, rel=1e-12)

    def test_bob_ratio_product_is_lambda_independent(self):
        # the product of the two probe settings depends on p and the optics only
        p, mu, nu = sp.symbols("p mu nu", positive=True)
        l2 = sp.symbols("l2", positive=True)
        b0 = l2 / ((1 - l2) * p) * (1 - mu) * (1 - nu) / (1 - 2 * mu) ** 2
        b1 = (1 - l2) * (1 - p) / l2 * (2 * nu - 1) ** 2 / (2 * (1 - mu) * (1 - nu))
        assert sp.diff(sp.simplify(b0 * b1), l2) == 0
        prods = []
        for l2v in (0.2, 0.5, 0.7):
            c = ClonerParams.from_lambda2(0.5, l2v)
            prods.append(bda_settings(c, IDEAL, 0).bob * bda_settings(c, IDEAL, 1).bob)
        assert np.ptp(prods) < 1e-12

    @pytest.mark.parametrize("mu,nu", [(0.5, 0.2), (0.7, 0.5)])
    def test_singular(self, mu, nu):
        with pytest.raises(SingularOpticsError, match="singular PDBS"):
            bda_settings(ClonerParams(0.5, 0.5), OpticalModel(mu, nu), 0)

    @pytest.mark.parametrize("lam", [0.0, 1.0])
    def test_degenerate_strength_flagged(self, lam):
        r = bda_settings(ClonerParams(0.5, lam), MEASURED, 0)
        assert not r.finite
        assert r.bob in (0.0, math.inf)

    def test_presets(self):
        assert (MEASURED.mu, MEASURED.nu) == (0.77, 0.19)
        assert IDEAL.mu == pytest.approx((1 + 1 / math.sqrt(3)) / 2)
        with pytest.raises(ValueError):
            OpticalModel.preset("perfect")


class TestSuccessProbability:
    @pytest.mark.parametrize("optics", [IDEAL, MEASURED])
    @pytest.mark.parametrize("probe", [0, 1])
    def test_filtered_state_is_target_branch(self, optics, probe, rng):
        c = ClonerParams.from_lambda2(4 / 7, 4 / 11)
        for _ in range(5):
            ket = random_ket(rng)
            out = filtered_output(ket, c, optics, probe)
            target = apply_probe_map(ket, probe, c).state
            assert abs(abs(np.vdot(out / np.linalg.norm(out), target)) - 1) < 1e-12

    @pytest.mark.parametrize("optics", [IDEAL, MEASURED])
    def test_filters_only_attenuate(self, optics):
        c = ClonerParams.from_lambda2(0.5, 1 / 3)
        for probe in (0, 1):
            t = filter_transmittances(c, optics, probe)
            assert all(0 <= v <= 1 for v in t)
            assert max(t[:2]) == 1 and max(t[2:]) == 1

    @given(params_st.filter(lambda c: 0.01 < c.lam < 0.99 and 0.01 < c.p < 0.99))
    @settings(max_examples=50)
    def test_bounds(self, c):
        for optics in (IDEAL, MEASURED):
            ps = success_probability(c, optics, "bb84")
            assert 0 < ps <= 1

    def test_rotation_invariance(self, rng):
        c = ClonerParams.from_lambda2(0.5, 1 / 3)
        base = success_probability(c, IDEAL, "bb84")
        for phase in rng.uniform(0, 2 * math.pi, 20):
            ket = np.array([1, np.exp(1j * phase)]) / math.sqrt(2)
            rates = [np.vdot(v, v).real for v in (filtered_output(ket, c, IDEAL, x) for x in (0, 1))]
            assert abs(np.mean(rates) - base) < 1e-10
        assert success_probability(c, IDEAL, "r04") == pytest.approx(base, abs=1e-10)

    def test_loss_conversion(self):
        assert loss_db(0.2) == pytest.approx(6.99, abs=0.01)
        with pytest.raises(ValueError):
            loss_db(0.0)

    def test_singular_optics_propagates(self):
        with pytest.raises(SingularOpticsError):
            success_probability(ClonerParams(0.5, 0.5), OpticalModel(0.5, 0.3))
