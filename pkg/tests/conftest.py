"""Shared fixtures and the random stable-network generator."""

import numpy as np
import pytest

from delaysis import (
    EpidemicNetwork,
    assemble_system_matrix,
    build_three_star_fixture,
    check_stability,
)

# one line per acceptance criterion, printed after the run summary
CRITERIA_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)


def random_stable_network(rng, n_max=10, allow_zero_tau=True):
    """Random connected network strictly inside the stability box.

    Recovery rates are shifted past the adjacency spectral radius so
    lambda_max <= -0.1, and the delay is drawn as a safe fraction of
    pi / (2 |lambda_min|).
    """
    n = int(rng.integers(2, n_max + 1))
    edges = [(int(rng.integers(0, k)), k) for k in range(1, n)]
    extra = int(rng.integers(0, n))
    seen = {(min(i, j), max(i, j)) for i, j in edges}
    for _ in range(extra):
        i, j = int(rng.integers(0, n)), int(rng.integers(0, n))
        key = (min(i, j), max(i, j))
        if i != j and key not in seen:
            seen.add(key)
            edges.append(key)
    edges = np.array(sorted(seen), dtype=int)
    weights = rng.uniform(0.2, 2.0, edges.shape[0])
    beta = float(rng.uniform(0.2, 1.0))

    adj = np.zeros((n, n))
    adj[edges[:, 0], edges[:, 1]] = weights
    adj += adj.T
    top = float(np.linalg.eigvalsh(beta * adj)[-1])
    delta = top + rng.uniform(0.1, 1.0, n)

    net = EpidemicNetwork(beta=beta, tau=0.0, delta=delta,
                          sigma=rng.uniform(0.3, 1.5, n),
                          edges=edges, weights=weights)
    lam_min = assemble_system_matrix(net).eigenvalues[0]
    if allow_zero_tau and rng.random() < 0.25:
        tau = 0.0
    else:
        tau = float(rng.uniform(0.2, 0.9) * np.pi / (2.0 * abs(lam_min)))
    net = net.with_tau(tau)
    report = check_stability(assemble_system_matrix(net), tau)
    assert report.stable, "generator must only emit stable systems"
    return net


@pytest.fixture(scope="session")
def fixture_network():
    return build_three_star_fixture()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
