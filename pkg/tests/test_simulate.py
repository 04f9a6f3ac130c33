"""Delayed RK4 integrator: accuracy, invariants, guard rails."""

import math

import numpy as np
import pytest

from delaysis import (
    ConvergenceError,
    EpidemicNetwork,
    SimulationMode,
    TrajectoryConfig,
    ValidationError,
    assemble_system_matrix,
    decay_rate_estimate,
    random_initial_state,
    simulate,
)

from conftest import random_stable_network


def isolated_node(delta=1.0, tau=0.0):
    return EpidemicNetwork(beta=0.5, tau=tau, delta=np.array([float(delta)]),
                           sigma=np.ones(1), edges=np.zeros((0, 2), dtype=int),
                           weights=np.zeros(0))


def pair(beta=0.5, delta=1.0, tau=0.0):
    return EpidemicNetwork(beta=beta, tau=tau,
                           delta=np.full(2, float(delta)), sigma=np.ones(2),
                           edges=np.array([[0, 1]]), weights=np.ones(1))


def run(net, p0, t_end, dt, mode="nonlinear", history=None):
    cfg = TrajectoryConfig(initial_state=np.asarray(p0, dtype=float),
                           t_end=t_end, dt=dt, mode=mode, history=history)
    return simulate(net, cfg)


class TestAccuracy:
    def test_zero_is_equilibrium_exactly(self):
        for mode in ("nonlinear", "linearized"):
            for tau in (0.0, 0.5):
                traj = run(pair(tau=tau), [0.0, 0.0], 5.0, 0.025, mode)
                assert np.all(traj.states == 0.0)

    def test_isolated_node_exponential(self):
        traj = run(isolated_node(), [0.1], 1.0, 0.01)
        assert abs(traj.states[-1][0] - 0.1 * math.exp(-1.0)) <= 1e-6

    def test_isolated_node_decay_rate(self):
        traj = run(isolated_node(), [0.1], 10.0, 0.01)
        assert decay_rate_estimate(traj) == pytest.approx(-1.0, rel=0.02)

    def test_pair_decay_tracks_slow_eigenvalue(self):
        # beta=0.5 on one unit edge, delta=1: eigenvalues -1.5 and -0.5.
        # The fast mode has zero node average, so p_bar is purely slow.
        net = pair()
        assert assemble_system_matrix(net).eigenvalues[-1] == pytest.approx(-0.5)
        traj = run(net, [0.02, 0.04], 30.0, 0.05, "linearized")
        assert decay_rate_estimate(traj) == pytest.approx(-0.5, rel=1e-3)

    def test_unstable_pair_grows(self):
        net = pair(beta=2.0)
        assert assemble_system_matrix(net).eigenvalues[-1] == pytest.approx(1.0)
        traj = run(net, [0.001, 0.001], 10.0, 0.01, "linearized")
        assert decay_rate_estimate(traj) > 0.3

    def test_delay_free_order_four(self):
        # dt halving shrinks the final-state error about 16x
        exact = 0.1 * math.exp(-1.0)
        errs = [abs(run(isolated_node(), [0.1], 1.0, dt).states[-1][0] - exact)
                for dt in (0.1, 0.05)]
        assert 8.0 <= errs[0] / errs[1] <= 32.0

    def test_delayed_order_four_without_clamping(self):
        # Mild rates keep the trajectory strictly inside (0, 1): no clamp
        # kinks, so the Hermite-midpoint stepper shows its full order.
        net = pair(delta=1.0, tau=0.5)
        p0 = [0.3, 0.1]
        ref = run(net, p0, 2.0, 0.5 / 640).states[-1]
        traj_a = run(net, p0, 2.0, 0.5 / 20)
        traj_b = run(net, p0, 2.0, 0.5 / 40)
        assert traj_a.clamp_events == 0 and traj_b.clamp_events == 0
        e_a = np.abs(traj_a.states[-1] - ref).max()
        e_b = np.abs(traj_b.states[-1] - ref).max()
        assert 8.0 <= e_a / e_b <= 32.0

    def test_linear_scalar_delay_solution_exact(self):
        # With constant history the solution is polynomial segment by
        # segment, which the stepper reproduces to roundoff.
        d, tau, p0, t_end = 1.5, 0.5, 0.1, 2.0
        segs = [np.polynomial.Polynomial([p0])]
        for k in range(int(round(t_end / tau))):
            nxt = (-d * segs[-1]).integ()
            start = segs[-1](tau) if k > 0 else p0
            segs.append(nxt + (start - nxt(0.0)))
        exact = segs[-1](tau)
        traj = run(isolated_node(d, tau), [p0], t_end, tau / 40, "linearized")
        assert abs(traj.states[-1][0] - exact) <= 1e-13


class TestLinearization:
    def test_modes_agree_for_small_states(self, rng):
        # linearization error is quadratic in the state, so at 1e-4
        # amplitudes the two modes track each other to 1e-6
        for _ in range(8):
            net = random_stable_network(rng)
            lam_min = assemble_system_matrix(net).eigenvalues[0]
            tau = min(net.tau, 0.3 / abs(lam_min))
            net = net.with_tau(tau)
            dt = tau / 40 if tau > 0 else 0.02
            p0 = rng.uniform(0.0, 1e-4, net.node_count)
            lin = run(net, p0, 5.0, dt, "linearized").states
            non = run(net, p0, 5.0, dt, "nonlinear").states
            assert np.abs(lin - non).max() <= 1e-6

    def test_windowed_norm_decays_after_transient(self, rng):
        # Modes near the delay margin ring with pseudo-period up to four
        # delays, so monotonicity holds for maxima over 4-delay windows
        # once the 5-delay transient has passed.
        for _ in range(12):
            net = random_stable_network(rng, allow_zero_tau=False)
            m = 40
            p0 = rng.uniform(0.0, 0.05, net.node_count)
            traj = run(net, p0, 45 * net.tau, net.tau / m, "linearized")
            norms = np.abs(traj.states).max(axis=1)
            k, wins = 5 * m, []
            while k + 4 * m <= norms.shape[0]:
                wins.append(norms[k:k + 4 * m].max())
                k += 4 * m
            assert len(wins) >= 8
            for a, b in zip(wins, wins[1:]):
                assert b <= a * (1 + 1e-12)

    def test_modal_decay_monotone_without_ringing(self, rng):
        # below |lam|*tau = 1/e every characteristic root is real, so each
        # modal coordinate decays monotonically once its own transient
        # (a few delays long) has passed
        for _ in range(8):
            net = random_stable_network(rng, allow_zero_tau=False)
            sysm = assemble_system_matrix(net)
            net = net.with_tau(0.9 / (math.e * abs(sysm.eigenvalues[0])))
            m = 40
            p0 = rng.uniform(0.0, 0.05, net.node_count)
            traj = run(net, p0, 30 * net.tau, net.tau / m, "linearized")
            modal = np.abs(traj.states @ sysm.eigenvectors)
            tail = modal[5 * m:]
            growth = np.diff(tail, axis=0) - 1e-12 * np.maximum(tail[:-1], 1e-300)
            assert np.all(growth <= 0)


class TestGuardRails:
    def test_dt_must_divide_delay(self):
        with pytest.raises(ValidationError, match="divide"):
            run(isolated_node(tau=1.0), [0.1], 5.0, 0.3)

    def test_at_least_twenty_steps_per_delay(self):
        with pytest.raises(ValidationError, match="at least"):
            run(isolated_node(tau=1.0), [0.1], 5.0, 0.1)

    def test_clamping_counts_events_and_keeps_box(self):
        # delta*tau = 1.5 rings hard enough to undershoot zero
        traj = run(isolated_node(delta=1.5, tau=1.0), [0.5], 30.0, 0.05)
        assert traj.clamp_events > 0
        assert traj.states.min() >= 0.0
        assert traj.states.max() <= 1.0

    def test_blowup_raises_in_nonlinear_mode(self):
        with pytest.raises(ConvergenceError, match="dt too large"):
            run(isolated_node(delta=1000.0), [0.5], 1.0, 0.1)

    def test_no_blowup_check_in_linearized_mode(self):
        traj = run(isolated_node(delta=1000.0), [0.5], 1.0, 0.1, "linearized")
        assert traj.clamp_events == 0
        assert abs(traj.states[-1][0]) > 1.0

    def test_initial_state_size_mismatch(self):
        with pytest.raises(ValidationError, match="2-node"):
            run(pair(), [0.1], 1.0, 0.01)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            TrajectoryConfig(initial_state=np.array([0.1, np.nan]),
                             t_end=1.0, dt=0.01)
        with pytest.raises(ValidationError):
            TrajectoryConfig(initial_state=np.array([1.2]), t_end=1.0, dt=0.01)
        with pytest.raises(ValidationError):
            TrajectoryConfig(initial_state=np.array([0.1]), t_end=0.0, dt=0.01)
        with pytest.raises(ValidationError):
            TrajectoryConfig(initial_state=np.array([0.1]), t_end=1.0, dt=-0.1)
        with pytest.raises(ValidationError, match="unknown mode"):
            TrajectoryConfig(initial_state=np.array([0.1]), t_end=1.0,
                             dt=0.01, mode="rk45")
        with pytest.raises(ValidationError, match="history"):
            TrajectoryConfig(initial_state=np.array([0.1]), t_end=1.0,
                             dt=0.01, history=np.zeros(2))


class TestHistoryAndHelpers:
    def test_mode_parse_aliases(self):
        assert SimulationMode.parse("linear") is SimulationMode.LINEARIZED
        assert SimulationMode.parse("linearised") is SimulationMode.LINEARIZED
        assert SimulationMode.parse("NONLINEAR") is SimulationMode.NONLINEAR

    def test_history_defaults_to_initial_state(self):
        net = isolated_node(delta=1.5, tau=1.0)
        a = run(net, [0.5], 5.0, 0.05)
        b = run(net, [0.5], 5.0, 0.05, history=np.array([0.5]))
        assert np.array_equal(a.states, b.states)

    def test_history_callable_matches_constant(self):
        net = pair(tau=0.5)
        hist = np.array([0.2, 0.3])
        a = run(net, [0.2, 0.3], 5.0, 0.025, history=hist)
        b = run(net, [0.2, 0.3], 5.0, 0.025, history=lambda t: hist)
        assert np.array_equal(a.states, b.states)

    def test_peak_fields_consistent(self, rng):
        net = random_stable_network(rng)
        dt = net.tau / 40 if net.tau > 0 else 0.02
        p0 = rng.uniform(0.0, 0.05, net.node_count)
        traj = run(net, p0, 10.0, dt)
        k = int(np.argmax(traj.average_infection))
        assert traj.peak_height == traj.average_infection[k]
        assert traj.peak_time == traj.times[k]

    def test_decay_estimate_warns_on_zero_tail(self):
        traj = run(isolated_node(), [0.0], 1.0, 0.01)
        with pytest.warns(UserWarning, match="decay rate undefined"):
            assert decay_rate_estimate(traj) == float("-inf")

    def test_decay_estimate_window_validation(self):
        traj = run(isolated_node(), [0.1], 1.0, 0.01)
        with pytest.raises(ValidationError):
            decay_rate_estimate(traj, window=0.0)

    def test_random_initial_state(self):
        a = random_initial_state(50, seed=3)
        b = random_initial_state(50, seed=3)
        assert np.array_equal(a, b)
        assert a.shape == (50,)
        assert np.all((a >= 0.0) & (a < 0.05))
        assert not np.array_equal(a, random_initial_state(50, seed=4))
