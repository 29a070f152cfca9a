import math

import numpy as np
import pytest

from conftest import params_with_selectivity
from ionsel import (
    InternalSpace,
    ModeSpace,
    PureState,
    ZeroProbability,
    basis_state,
    coherent_state,
    cpg,
    cpg_process_fidelity,
    fidelity,
    fock_populations,
    fock_state,
    generate_fock,
    measure_population,
    refine_population,
    selective_cool,
    space,
    thermal_state,
    wigner,
)


def poisson(n, lam):
    return math.exp(-lam) * lam ** n / math.factorial(n)


class TestGenerateFock:
    def test_single_fock_input(self, params_s20):
        res = generate_fock(fock_state(ModeSpace(5), 2), 2, params_s20)
        assert res.herald_probability == pytest.approx(1.0, abs=1e-12)
        assert fidelity(res.post_state, fock_state(ModeSpace(5), 3)) == pytest.approx(1.0, abs=1e-12)
        assert res.herald_level == "e"

    def test_coherent_herald_probability(self, params_s20):
        coh = coherent_state(ModeSpace(20), 1.0)
        res = generate_fock(coh, 2, params_s20)
        assert res.herald_probability == pytest.approx(math.exp(-1) / 2, abs=1e-6)
        assert fidelity(res.post_state, fock_state(ModeSpace(20), 3)) == pytest.approx(1.0, abs=1e-12)

    def test_effective_mode_fidelity(self, params_s20):
        coh = coherent_state(ModeSpace(20), 1.0)
        res = generate_fock(coh, 2, params_s20, mode="effective")
        assert fidelity(res.post_state, fock_state(ModeSpace(20), 3)) >= 0.99

    def test_zero_probability(self, params_s20):
        with pytest.raises(ZeroProbability):
            generate_fock(fock_state(ModeSpace(5), 0), 2, params_s20)

    def test_cutoff_guard(self, params_s20):
        with pytest.raises(ValueError):
            generate_fock(fock_state(ModeSpace(3), 3), 3, params_s20)

    def test_herald_equals_population_random_states(self, params_s20, rng):
        # Born-rule contract: the herald rate is the initial P_n0
        mode = ModeSpace(8)
        for _ in range(50):
            v = rng.standard_normal(9) + 1j * rng.standard_normal(9)
            st = PureState(v, space(mode))
            n0 = int(rng.integers(0, 7))
            pops = fock_populations(st)
            if pops[n0] < 1e-12:
                continue
            res = generate_fock(st, n0, params_s20)
            assert res.herald_probability == pytest.approx(pops[n0], abs=1e-10)

    def test_mixed_input(self, params_s20):
        th = thermal_state(ModeSpace(15), 0.5)
        res = generate_fock(th, 1, params_s20)
        p1 = 0.5 / 2.25
        assert res.herald_probability == pytest.approx(p1, abs=1e-3)
        assert fidelity(res.post_state, fock_state(ModeSpace(15), 2)) >= 0.999


class TestSelectiveCool:
    def test_thermal(self, params_s20):
        th = thermal_state(ModeSpace(30), 0.5)
        res = selective_cool(th, params_s20)
        assert res.herald_probability == pytest.approx(0.5 / 2.25, abs=1e-3)
        assert fidelity(res.post_state, fock_state(ModeSpace(30), 0)) >= 0.999
        assert res.herald_level == "g"

    def test_single_phonon(self, params_s20):
        res = selective_cool(fock_state(ModeSpace(5), 1), params_s20)
        assert res.herald_probability == pytest.approx(1.0, abs=1e-12)
        assert fidelity(res.post_state, fock_state(ModeSpace(5), 0)) == pytest.approx(1.0, abs=1e-12)

    def test_vacuum_rejected(self, params_s20):
        with pytest.raises(ZeroProbability):
            selective_cool(fock_state(ModeSpace(5), 0), params_s20)

    def test_effective_mode(self, params_s20):
        th = thermal_state(ModeSpace(15), 0.5)
        res = selective_cool(th, params_s20, mode="effective")
        assert res.herald_probability == pytest.approx(0.5 / 2.25, abs=5e-3)
        assert fidelity(res.post_state, fock_state(ModeSpace(15), 0)) >= 0.99


class TestMeasurePopulation:
    def test_fock_exact(self, params_s20):
        est = measure_population(fock_state(ModeSpace(5), 3), 3, params_s20)
        assert est.estimate == pytest.approx(1.0, abs=1e-12)

    def test_coherent_vacuum_population(self, params_s20):
        est = measure_population(coherent_state(ModeSpace(20), 1.0), 0, params_s20)
        assert est.estimate == pytest.approx(math.exp(-1), abs=1e-6)

    def test_zero_population_returns_zero(self, params_s20):
        est = measure_population(fock_state(ModeSpace(5), 0), 3, params_s20)
        assert est.estimate == 0.0

    def test_finite_shots_within_binomial_error(self, params_s20):
        p_true = math.exp(-1)
        est = measure_population(coherent_state(ModeSpace(20), 1.0), 0, params_s20, shots=10_000, seed=11)
        sigma = math.sqrt(p_true * (1 - p_true) / 10_000)
        assert abs(est.estimate - p_true) < 3 * sigma
        assert est.record.shots == 10_000
        assert est.record.excited_counts == round(est.estimate * 10_000)

    def test_seeded_reproducibility(self, params_s20):
        a = measure_population(coherent_state(ModeSpace(20), 1.0), 0, params_s20, shots=500, seed=42)
        b = measure_population(coherent_state(ModeSpace(20), 1.0), 0, params_s20, shots=500, seed=42)
        assert a.estimate == b.estimate


class TestRefinePopulation:
    def test_rounds_zero_matches_measure(self, params_s20):
        coh = coherent_state(ModeSpace(12), 1.0)
        est = refine_population(coh, 1, params_s20, rounds=0, mode="ideal")
        base = measure_population(coh, 1, params_s20).estimate
        assert est == [base]

    def test_ideal_rounds_identical(self, params_s20):
        coh = coherent_state(ModeSpace(12), 1.0)
        est = refine_population(coh, 1, params_s20, rounds=2, mode="ideal")
        assert est[1] == pytest.approx(est[0], abs=1e-12)
        assert est[2] == pytest.approx(est[0], abs=1e-12)

    def test_effective_estimates_improve(self):
        p = params_with_selectivity(5.0)
        coh = coherent_state(ModeSpace(20), 1.0)
        true_p1 = fock_populations(coh)[1]
        est = refine_population(coh, 1, p, rounds=2, mode="effective")
        assert abs(est[1] - true_p1) < abs(est[0] - true_p1)
        assert abs(est[2] - true_p1) <= abs(est[1] - true_p1)

    def test_cutoff_overflow(self, params_s20):
        with pytest.raises(ValueError, match="cutoff"):
            refine_population(fock_state(ModeSpace(4), 1), 1, params_s20, rounds=3)


class TestWigner:
    def test_vacuum_origin(self, params_s20):
        g = wigner(fock_state(ModeSpace(20), 0), np.array([0j]), params_s20, threads=1)
        assert g.values[0] == pytest.approx(2.0, abs=1e-12)

    def test_fock_one_origin(self, params_s20):
        g = wigner(fock_state(ModeSpace(20), 1), np.array([0j]), params_s20, threads=1)
        assert g.values[0] == pytest.approx(-2.0, abs=1e-12)

    def test_coherent_closed_form(self, params_s20):
        beta = 0.7
        coh = coherent_state(ModeSpace(40), beta)
        alphas = np.array([0.0 + 0j, 0.5 + 0.5j, -1.0 + 0.3j, 1.9j])
        g = wigner(coh, alphas, params_s20, threads=1)
        expected = 2.0 * np.exp(-2.0 * np.abs(alphas - beta) ** 2)
        assert np.abs(g.values - expected).max() < 1e-3

    def test_protocol_matches_oracle_pure(self, params_s20):
        coh = coherent_state(ModeSpace(25), 0.8)
        alphas = np.array([0.2 + 0.1j, -0.5 - 0.4j])
        a = wigner(coh, alphas, params_s20, mode="oracle", threads=1).values
        b = wigner(coh, alphas, params_s20, mode="protocol", threads=1).values
        assert np.abs(a - b).max() < 1e-8

    def test_protocol_matches_oracle_thermal(self, params_s20):
        th = thermal_state(ModeSpace(25), 0.5)
        alphas = np.array([0.0 + 0j, 0.6 - 0.3j])
        a = wigner(th, alphas, params_s20, mode="oracle", threads=1).values
        b = wigner(th, alphas, params_s20, mode="protocol", threads=1).values
        assert np.abs(a - b).max() < 1e-8

    def test_convention_ratio(self, params_s20):
        coh = coherent_state(ModeSpace(25), 0.5)
        alphas = np.array([0.3 + 0.2j, -0.2 + 0.1j])
        paper = wigner(coh, alphas, params_s20, convention="paper", threads=1).values
        std = wigner(coh, alphas, params_s20, convention="standard", threads=1).values
        assert np.allclose(paper, std * math.pi, atol=1e-14)

    def test_grid_shape_preserved(self, params_s20):
        coh = coherent_state(ModeSpace(25), 0.5)
        alphas = (np.linspace(-1, 1, 3)[:, None] + 1j * np.linspace(-1, 1, 3)[None, :])
        g = wigner(coh, alphas, params_s20, threads=2)
        assert g.values.shape == (3, 3)

    def test_truncation_propagates(self, params_s20):
        from ionsel import TruncationError

        with pytest.raises(TruncationError):
            wigner(fock_state(ModeSpace(6), 0), np.array([4.0 + 0j]), params_s20, threads=1)

    def test_grid_bound_enforced(self):
        from ionsel import WignerGrid

        with pytest.raises(ValueError, match="bound"):
            WignerGrid(alphas=np.array([0j]), values=np.array([2.5]), convention="paper")

    def test_thread_cap_env(self, params_s20, monkeypatch):
        monkeypatch.setenv("IONSEL_THREADS", "2")
        coh = coherent_state(ModeSpace(20), 0.5)
        alphas = np.linspace(-1, 1, 12) + 0j
        g = wigner(coh, alphas, params_s20)
        expected = 2.0 * np.exp(-2.0 * np.abs(alphas - 0.5) ** 2)
        assert np.abs(g.values - expected).max() < 1e-3


def uniform_two_qubit():
    qsp = space(InternalSpace.two_level(), InternalSpace.two_level())
    return PureState(np.array([0.5, 0.5, 0.5, 0.5], complex), qsp)


class TestCpg:
    def test_truth_table_uniform(self, params_s20):
        out = cpg(uniform_two_qubit(), params_s20, mode="ideal", cutoff=5)
        amps = out.amplitudes.reshape(4, 6)
        assert np.allclose(amps[:, 0], [0.5, 0.5, 0.5, -0.5], atol=1e-12)
        assert np.abs(amps[:, 1:]).max() < 1e-12

    def test_ground_input_unchanged(self, params_s20):
        qsp = space(InternalSpace.two_level(), InternalSpace.two_level())
        out = cpg(basis_state(qsp, "g", "g"), params_s20, mode="ideal", cutoff=4)
        assert abs(out.amplitudes[0]) == pytest.approx(1.0, abs=1e-12)

    def test_double_application_is_identity(self, params_s20):
        first = cpg(uniform_two_qubit(), params_s20, mode="ideal", cutoff=5)
        second = cpg(first, params_s20, mode="ideal")
        target = np.kron([0.5, 0.5, 0.5, 0.5], np.eye(1, 6)[0])
        assert abs(np.vdot(target, second.amplitudes)) ** 2 == pytest.approx(1.0, abs=1e-10)

    def test_motional_superposition_still_valid(self, params_s20):
        mot = PureState(np.array([0.6, 0.8, 0, 0, 0, 0], complex), space(ModeSpace(5)))
        out = cpg(uniform_two_qubit(), params_s20, mode="ideal", cutoff=5, motional=mot)
        target = np.kron([0.5, 0.5, 0.5, -0.5], mot.amplitudes)
        assert abs(np.vdot(target, out.amplitudes)) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_high_fock_spectator_untouched(self, params_s20):
        # populations above |2> are outside every pulsed doublet
        vec = np.zeros(7, complex)
        vec[0] = math.sqrt(0.5)
        vec[4] = math.sqrt(0.5)
        mot = PureState(vec, space(ModeSpace(6)))
        out = cpg(uniform_two_qubit(), params_s20, mode="ideal", cutoff=6, motional=mot)
        amps = out.amplitudes.reshape(4, 7)
        assert np.sum(np.abs(amps[:, 4]) ** 2) == pytest.approx(0.5, abs=1e-12)

    def test_cutoff_guard(self, params_s20):
        with pytest.raises(ValueError, match="cutoff"):
            cpg(uniform_two_qubit(), params_s20, mode="ideal", cutoff=2)

    def test_effective_process_fidelity(self, params_s20):
        fid, mode_ret = cpg_process_fidelity(params_s20, mode="effective", cutoff=5)
        assert fid >= 0.99
        assert mode_ret >= 0.99

    def test_effective_uniform_state(self, params_s20):
        out = cpg(uniform_two_qubit(), params_s20, mode="effective", cutoff=5)
        target = np.kron([0.5, 0.5, 0.5, -0.5], np.eye(1, 6)[0])
        assert abs(np.vdot(target, out.amplitudes)) ** 2 >= 0.99


class TestProtocolResultInvariants:
    def test_probability_bounds(self, params_s20, rng):
        mode = ModeSpace(10)
        for _ in range(10):
            v = rng.standard_normal(11) + 1j * rng.standard_normal(11)
            st = PureState(v, space(mode))
            res = generate_fock(st, 3, params_s20, mode="effective")
            assert 0.0 <= res.herald_probability <= 1.0 + 1e-12
            pops = fock_populations(res.post_state)
            assert abs(pops.sum() - 1.0) < 1e-9
