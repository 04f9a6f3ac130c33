"""Performance value, its two independent routes, and centrality."""

import math

import numpy as np
import pytest
import scipy.integrate

from delaysis import (
    NoiseKind,
    NoiseModel,
    SingularityError,
    UnstableSystemError,
    ValidationError,
    assemble_system_matrix,
    centrality,
    performance_approx,
    performance_closed_form,
    performance_frequency_oracle,
)

from conftest import random_stable_network

BOTH_KINDS = (NoiseKind.MODELING, NoiseKind.TESTING)


def unit_noise(kind, n):
    return NoiseModel(kind=kind, sigma=np.ones(n))


class TestClosedForm:
    def test_single_node_frozen_value(self):
        # One node, unit recovery, unit noise, tau = 0.5. The modal sum
        # collapses to cos(tau) / (2 * (1 - sin(tau))).
        tau = 0.5
        expected = math.cos(tau) / (2.0 * (1.0 - math.sin(tau)))
        assert expected == pytest.approx(0.8428982085841699, rel=1e-15)
        M = np.array([[-1.0]])
        for kind in BOTH_KINDS:
            # at lam = -1 the testing weight lam^2 is 1, so both kinds agree
            value = performance_closed_form(M, unit_noise(kind, 1), tau)
            assert value.rho_ss == pytest.approx(expected, rel=1e-14)

    def test_zero_delay_single_node(self):
        value = performance_closed_form(np.array([[-2.0]]),
                                        unit_noise(NoiseKind.MODELING, 1), 0.0)
        assert value.rho_ss == pytest.approx(0.25, rel=1e-15)

    def test_per_mode_decomposition(self, rng):
        net = random_stable_network(rng)
        system = assemble_system_matrix(net)
        noise = NoiseModel(kind=NoiseKind.MODELING, sigma=net.sigma)
        value = performance_closed_form(system, noise, net.tau)
        assert value.per_mode.shape == (net.node_count,)
        assert value.rho_ss == pytest.approx(value.per_mode.sum(), rel=1e-15)

    def test_modal_gains_match_input_matrix(self, rng):
        for kind in BOTH_KINDS:
            net = random_stable_network(rng)
            system = assemble_system_matrix(net)
            noise = NoiseModel(kind=kind, sigma=net.sigma)
            B = noise.input_matrix(system)
            gram = system.eigenvectors.T @ B @ B.T @ system.eigenvectors
            assert np.abs(noise.modal_gains(system) - np.diag(gram)).max() <= 1e-12

    def test_delay_raises_variance(self, rng):
        # lengthening the delay inside the stability box never helps
        for _ in range(5):
            net = random_stable_network(rng, allow_zero_tau=False)
            system = assemble_system_matrix(net)
            noise = NoiseModel(kind=NoiseKind.MODELING, sigma=net.sigma)
            rho_0 = performance_closed_form(system, noise, 0.0).rho_ss
            rho_tau = performance_closed_form(system, noise, net.tau).rho_ss
            assert rho_tau >= rho_0


class TestFrequencyOracle:
    def test_matches_closed_form(self, rng):
        worst = 0.0
        for _ in range(10):
            net = random_stable_network(rng)
            system = assemble_system_matrix(net)
            for kind in BOTH_KINDS:
                noise = NoiseModel(kind=kind, sigma=net.sigma)
                exact = performance_closed_form(system, noise, net.tau).rho_ss
                oracle = performance_frequency_oracle(system, noise, net.tau)
                worst = max(worst, abs(oracle - exact) / abs(exact))
        assert worst <= 1e-6

    def test_spectrum_against_quad(self):
        # Rebuild the integrand by hand and integrate it with an
        # off-the-shelf routine; all three numbers must agree.
        lam = np.array([-1.5, -0.5])
        phi = np.array([0.8, 1.3])
        tau = 0.3
        system = np.diag(lam)
        sigma = np.sqrt(phi)
        noise = NoiseModel(kind=NoiseKind.MODELING, sigma=sigma)

        def spectrum(w):
            denom = (w + lam * np.sin(tau * w)) ** 2 + (lam * np.cos(tau * w)) ** 2
            return float((phi / denom).sum())

        omega_max = 3000.0
        integral, err = scipy.integrate.quad(spectrum, 0.0, omega_max,
                                             limit=2000, epsabs=1e-12,
                                             epsrel=1e-12)
        assert err < 1e-8
        via_quad = (integral + phi.sum() / omega_max) / math.pi
        exact = performance_closed_form(system, noise, tau).rho_ss
        oracle = performance_frequency_oracle(system, noise, tau,
                                              omega_max=omega_max)
        assert via_quad == pytest.approx(exact, rel=1e-5)
        assert oracle == pytest.approx(exact, rel=1e-6)

    def test_zero_delay(self):
        M = np.diag([-2.0, -1.0])
        noise = unit_noise(NoiseKind.MODELING, 2)
        exact = performance_closed_form(M, noise, 0.0).rho_ss
        oracle = performance_frequency_oracle(M, noise, 0.0)
        assert oracle == pytest.approx(exact, rel=1e-6)

    def test_omega_max_validation(self):
        with pytest.raises(ValidationError):
            performance_frequency_oracle(np.array([[-1.0]]),
                                         unit_noise(NoiseKind.MODELING, 1),
                                         0.1, omega_max=-5.0)


class TestCentrality:
    def test_identity_with_performance(self, rng):
        for _ in range(10):
            net = random_stable_network(rng)
            system = assemble_system_matrix(net)
            for kind in BOTH_KINDS:
                noise = NoiseModel(kind=kind, sigma=net.sigma)
                rho = performance_closed_form(system, noise, net.tau).rho_ss
                eta = centrality(system, kind, net.tau).eta
                assert eta @ net.sigma ** 2 == pytest.approx(rho, rel=1e-9)

    def test_matches_finite_differences(self, rng):
        net = random_stable_network(rng)
        system = assemble_system_matrix(net)
        h = 1e-5
        for kind in BOTH_KINDS:
            eta = centrality(system, kind, net.tau).eta
            sq = net.sigma ** 2
            for i in range(net.node_count):
                up, down = sq.copy(), sq.copy()
                up[i] += h
                down[i] -= h
                rho_up = performance_closed_form(
                    system, NoiseModel(kind=kind, sigma=np.sqrt(up)), net.tau
                ).rho_ss
                rho_down = performance_closed_form(
                    system, NoiseModel(kind=kind, sigma=np.sqrt(down)), net.tau
                ).rho_ss
                fd = (rho_up - rho_down) / (2.0 * h)
                assert fd == pytest.approx(eta[i], rel=1e-6, abs=1e-12)

    def test_single_node_positive(self):
        vec = centrality(np.array([[-1.0]]), NoiseKind.MODELING, 0.5)
        assert vec.eta[0] == pytest.approx(0.8428982085841699, rel=1e-14)

    def test_ranking_breaks_ties_by_index(self):
        from delaysis import CentralityVector

        vec = CentralityVector(eta=np.array([0.5, 0.7, 0.5]),
                               kind=NoiseKind.MODELING, tau=0.0)
        assert vec.ranking().tolist() == [1, 0, 2]

    def test_fixture_most_central_is_slowest_hub(self, fixture_network):
        system = assemble_system_matrix(fixture_network)
        vec = centrality(system, NoiseKind.MODELING, fixture_network.tau)
        assert vec.ranking()[0] == 14


class TestApprox:
    def test_exact_at_zero_delay(self, rng):
        for _ in range(10):
            net = random_stable_network(rng)
            system = assemble_system_matrix(net)
            noise = NoiseModel(kind=NoiseKind.MODELING, sigma=net.sigma)
            exact = performance_closed_form(system, noise, 0.0).rho_ss
            approx = performance_approx(system, noise, 0.0)
            assert approx == pytest.approx(exact, rel=1e-12)

    def test_single_node_frozen_value(self):
        approx = performance_approx(np.array([[-1.0]]),
                                    unit_noise(NoiseKind.MODELING, 1), 0.5)
        assert approx == pytest.approx(0.8194271414809383, rel=1e-13)
        exact = math.cos(0.5) / (2.0 * (1.0 - math.sin(0.5)))
        assert abs(approx - exact) / exact < 0.10

    def test_relative_error_inside_box(self):
        # single mode swept across the usable range of lam*tau products
        noise = unit_noise(NoiseKind.MODELING, 1)
        for x in np.linspace(-1.2, -0.1, 23):
            system = np.array([[-1.0]])
            tau = -x
            exact = performance_closed_form(system, noise, tau).rho_ss
            approx = performance_approx(system, noise, tau)
            assert abs(approx - exact) / exact < 0.10

    def test_random_networks_inside_box(self, rng):
        for _ in range(10):
            net = random_stable_network(rng, allow_zero_tau=False)
            system = assemble_system_matrix(net)
            noise = NoiseModel(kind=NoiseKind.MODELING, sigma=net.sigma)
            exact = performance_closed_form(system, noise, net.tau).rho_ss
            approx = performance_approx(system, noise, net.tau)
            assert abs(approx - exact) / exact < 0.10


class TestGates:
    def test_positive_eigenvalue_rejected(self):
        M = np.diag([-1.0, 0.5])
        noise = unit_noise(NoiseKind.MODELING, 2)
        for func in (performance_closed_form, performance_frequency_oracle,
                     performance_approx):
            with pytest.raises(UnstableSystemError):
                func(M, noise, 0.1)
        with pytest.raises(UnstableSystemError):
            centrality(M, NoiseKind.MODELING, 0.1)

    def test_delay_margin_violation_rejected(self):
        M = np.diag([-4.0, -1.0])
        noise = unit_noise(NoiseKind.MODELING, 2)
        with pytest.raises(UnstableSystemError, match="delay margin"):
            performance_closed_form(M, noise, 1.0)

    def test_marginal_mode_is_singular(self):
        # lam * tau = -pi/2 exactly: inside the closed box but on the
        # pole of the modal factor, so every route must refuse.
        M = np.array([[-1.0]])
        noise = unit_noise(NoiseKind.MODELING, 1)
        tau = math.pi / 2.0
        with pytest.raises(SingularityError):
            performance_closed_form(M, noise, tau)
        with pytest.raises(SingularityError):
            centrality(M, NoiseKind.MODELING, tau)
        with pytest.raises(SingularityError):
            performance_frequency_oracle(M, noise, tau)
        with pytest.raises(SingularityError):
            performance_approx(M, noise, tau)

    def test_negative_tau_rejected(self):
        with pytest.raises(ValidationError):
            performance_closed_form(np.array([[-1.0]]),
                                    unit_noise(NoiseKind.MODELING, 1), -0.5)

    def test_sigma_size_mismatch(self):
        with pytest.raises(ValidationError, match="2 intensities"):
            performance_closed_form(np.array([[-1.0]]),
                                    unit_noise(NoiseKind.MODELING, 2), 0.0)


class TestNoiseModel:
    def test_parse(self):
        assert NoiseKind.parse("model") is NoiseKind.MODELING
        assert NoiseKind.parse("modeling") is NoiseKind.MODELING
        assert NoiseKind.parse("test") is NoiseKind.TESTING
        assert NoiseKind.parse("testing") is NoiseKind.TESTING
        with pytest.raises(ValidationError, match="model, test"):
            NoiseKind.parse("bogus")

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValidationError):
            NoiseModel(kind=NoiseKind.MODELING, sigma=np.array([1.0, -1.0]))

    def test_kinds_differ_away_from_unit_eigenvalues(self):
        M = np.diag([-2.0, -0.5])
        rho_model = performance_closed_form(
            M, unit_noise(NoiseKind.MODELING, 2), 0.0).rho_ss
        rho_test = performance_closed_form(
            M, unit_noise(NoiseKind.TESTING, 2), 0.0).rho_ss
        assert rho_model == pytest.approx(0.25 + 1.0, rel=1e-14)
        assert rho_test == pytest.approx(1.0 + 0.25, rel=1e-14)
        # same total by coincidence of the chosen rates; modes must swap
        per_model = performance_closed_form(
            M, unit_noise(NoiseKind.MODELING, 2), 0.0).per_mode
        per_test = performance_closed_form(
            M, unit_noise(NoiseKind.TESTING, 2), 0.0).per_mode
        assert per_model.tolist() == pytest.approx(per_test[::-1].tolist())
