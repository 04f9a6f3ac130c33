"""Meta-population network model: loading, validation, and matrix assembly.

A network couples a weighted undirected contact graph with per-node
recovery rates, a uniform infection rate, a constant delay, and
per-node noise intensities. Files use 1-based node ids; everything in
memory is 0-based.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spectral import SystemMatrix

__all__ = [
    "EpidemicNetwork",
    "assemble_system_matrix",
    "build_three_star_fixture",
    "edge_basis",
    "fixture_document",
    "load_network",
    "network_from_document",
    "network_to_document",
    "save_network",
]

# Frozen parameters of the bundled 20-node three-star fixture. The shape
# is three hubs in a line with 6/7/4 leaves and thick core edges. Rates
# were tuned so the network sits inside the stability box with a slow
# leading mode (lambda_max ~ -0.024) while the fastest mode
# (lambda_min ~ -3.35) flips unstable between tau = 0.4 and tau = 0.8.
# Hubs recover far slower than leaves, which is what gives delayed
# recovery its bite and the weight optimizer its headroom.
FIXTURE_HUB_IDS = (1, 2, 15)
FIXTURE_LEAF_COUNTS = (6, 7, 4)
FIXTURE_HUB_HUB_WEIGHT = 3.0
FIXTURE_HUB_LEAF_WEIGHT = 1.0
FIXTURE_BETA = 0.12
FIXTURE_DELTA_HUB = (0.49, 0.97, 0.25)
FIXTURE_DELTA_LEAF = 3.3
FIXTURE_TAU = 0.3
FIXTURE_SIGMA = 1.0
FIXTURE_FILENAME = "three_star_20.json"


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EpidemicNetwork:
    """Weighted undirected contact network with per-node rates.

    Fields
    ------
    beta : uniform infection rate, > 0.
    tau : constant delay, >= 0.
    delta : per-node recovery rates, shape (n,), all > 0.
    sigma : per-node noise intensities, shape (n,), all >= 0.
    edges : int array of shape (m, 2); each row (i, j) with i < j.
    weights : edge weights, shape (m,), all >= 0.

    Instances are immutable; use :meth:`with_weights` / :meth:`with_tau`
    to derive modified copies.
    """

    beta: float
    tau: float
    delta: np.ndarray
    sigma: np.ndarray
    edges: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        delta = _frozen_array(self.delta)
        sigma = _frozen_array(self.sigma)
        edges = np.array(self.edges, dtype=int).reshape(-1, 2)
        weights = _frozen_array(self.weights).reshape(-1)
        n = delta.shape[0]

        if n < 1:
            raise ValidationError("network needs at least one node")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValidationError(f"beta must be finite and positive, got {self.beta}")
        if not (np.isfinite(self.tau) and self.tau >= 0):
            raise ValidationError(f"tau must be finite and nonnegative, got {self.tau}")
        if not np.all(np.isfinite(delta)) or np.any(delta <= 0):
            raise ValidationError("every recovery rate delta_i must be finite and positive")
        if sigma.shape != (n,):
            raise ValidationError(
                f"sigma has length {sigma.shape[0]}, expected {n}"
            )
        if not np.all(np.isfinite(sigma)) or np.any(sigma < 0):
            raise ValidationError("every sigma_i must be finite and nonnegative")
        if weights.shape[0] != edges.shape[0]:
            raise ValidationError(
                f"{edges.shape[0]} edges but {weights.shape[0]} weights"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValidationError("edge weights must be finite and nonnegative")

        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValidationError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                bad = edges[edges[:, 0] == edges[:, 1]][0, 0]
                raise ValidationError(f"self-loop at node {bad + 1}")
            edges = np.sort(edges, axis=1)  # normalize to i < j
            keys = edges[:, 0] * n + edges[:, 1]
            if np.unique(keys).size != keys.size:
                raise ValidationError("duplicate edge (orientation ignored)")
        edges.setflags(write=False)

        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpidemicNetwork):
            return NotImplemented
        return (
            self.beta == other.beta
            and self.tau == other.tau
            and np.array_equal(self.delta, other.delta)
            and np.array_equal(self.sigma, other.sigma)
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.weights, other.weights)
        )

    @property
    def node_count(self) -> int:
        return self.delta.shape[0]

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def adjacency(self, weights=None) -> np.ndarray:
        """Dense weighted adjacency matrix (optionally with other weights)."""
        w = self.weights if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (self.edge_count,):
            raise ValidationError(
                f"expected {self.edge_count} weights, got shape {w.shape}"
            )
        n = self.node_count
        A = np.zeros((n, n))
        if self.edge_count:
            i, j = self.edges[:, 0], self.edges[:, 1]
            A[i, j] = w
            A[j, i] = w
        return A

    def with_weights(self, weights) -> "EpidemicNetwork":
        return EpidemicNetwork(
            beta=self.beta, tau=self.tau, delta=self.delta, sigma=self.sigma,
            edges=self.edges, weights=np.asarray(weights, dtype=float),
        )

    def with_tau(self, tau: float) -> "EpidemicNetwork":
        return EpidemicNetwork(
            beta=self.beta, tau=float(tau), delta=self.delta, sigma=self.sigma,
            edges=self.edges, weights=self.weights,
        )


def assemble_system_matrix(net: EpidemicNetwork, weights=None) -> SystemMatrix:
    """System matrix beta*A - diag(delta) with cached eigendecomposition.

    ``weights`` substitutes the network's edge weights without copying
    the network (used heavily by the optimizer).
    """
    matrix = net.beta * net.adjacency(weights)
    np.fill_diagonal(matrix, -net.delta)
    return SystemMatrix(matrix)


def edge_basis(net: EpidemicNetwork) -> list[np.ndarray]:
    """Per-edge indicator matrices A_e; sum(w_e * A_e) equals the adjacency."""
    n = net.node_count
    basis = []
    for i, j in net.edges:
        A_e = np.zeros((n, n))
        A_e[i, j] = 1.0
        A_e[j, i] = 1.0
        basis.append(A_e)
    return basis


# ---------------------------------------------------------------------------
# JSON document handling


def network_from_document(doc: dict) -> EpidemicNetwork:
    """Build a network from a parsed JSON document (1-based node ids)."""
    if not isinstance(doc, dict):
        raise ValidationError("network document must be a JSON object")
    for key in ("beta", "tau", "nodes", "edges"):
        if key not in doc:
            raise ValidationError(f"missing field '{key}'")

    nodes = doc["nodes"]
    if not isinstance(nodes, list) or not nodes:
        raise ValidationError("'nodes' must be a non-empty list")
    n = len(nodes)
    delta = np.empty(n)
    sigma = np.empty(n)
    seen = np.zeros(n, dtype=bool)
    for entry in nodes:
        try:
            node_id = int(entry["id"])
        except (TypeError, KeyError) as exc:
            raise ValidationError(f"node entry missing integer 'id': {entry!r}") from exc
        if not 1 <= node_id <= n:
            raise ValidationError(f"node id {node_id} outside 1..{n}")
        if seen[node_id - 1]:
            raise ValidationError(f"duplicate node id {node_id}")
        seen[node_id - 1] = True
        try:
            delta[node_id - 1] = float(entry["delta"])
            sigma[node_id - 1] = float(entry.get("sigma", 0.0))
        except (TypeError, ValueError, KeyError) as exc:
            raise ValidationError(f"bad rates for node {node_id}: {entry!r}") from exc

    edges_doc = doc["edges"]
    if not isinstance(edges_doc, list):
        raise ValidationError("'edges' must be a list")
    edges = np.zeros((len(edges_doc), 2), dtype=int)
    weights = np.zeros(len(edges_doc))
    for k, entry in enumerate(edges_doc):
        try:
            i, j, w = int(entry["i"]), int(entry["j"]), float(entry["w"])
        except (TypeError, ValueError, KeyError) as exc:
            raise ValidationError(f"bad edge entry {entry!r}") from exc
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValidationError(f"edge ({i},{j}) endpoint outside 1..{n}")
        edges[k] = (i - 1, j - 1)
        weights[k] = w

    return EpidemicNetwork(
        beta=float(doc["beta"]), tau=float(doc["tau"]),
        delta=delta, sigma=sigma, edges=edges, weights=weights,
    )


def network_to_document(net: EpidemicNetwork) -> dict:
    """Inverse of :func:`network_from_document` (emits 1-based ids)."""
    return {
        "beta": net.beta,
        "tau": net.tau,
        "nodes": [
            {"id": i + 1, "delta": float(net.delta[i]), "sigma": float(net.sigma[i])}
            for i in range(net.node_count)
        ],
        "edges": [
            {"i": int(i) + 1, "j": int(j) + 1, "w": float(w)}
            for (i, j), w in zip(net.edges, net.weights)
        ],
    }


def load_network(path) -> EpidemicNetwork:
    """Load and validate a network JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read network file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc}") from exc
    return network_from_document(doc)


def save_network(net: EpidemicNetwork, path) -> None:
    """Write a network to a JSON file (round-trips with load_network)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(network_to_document(net), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Bundled fixture


def build_three_star_fixture(
    hub_ids=FIXTURE_HUB_IDS,
    leaf_counts=FIXTURE_LEAF_COUNTS,
    hub_hub_weight=FIXTURE_HUB_HUB_WEIGHT,
    hub_leaf_weight=FIXTURE_HUB_LEAF_WEIGHT,
    beta=FIXTURE_BETA,
    delta_hub=FIXTURE_DELTA_HUB,
    delta_leaf=FIXTURE_DELTA_LEAF,
    tau=FIXTURE_TAU,
    sigma=FIXTURE_SIGMA,
) -> EpidemicNetwork:
    """Tree of three star graphs whose hubs form a line.

    ``hub_ids`` are 1-based ids of the three hubs; the middle entry of
    the line is ``hub_ids[1]``. Each hub gets ``leaf_counts[k]`` leaves,
    assigned the remaining ids in ascending order. Hub-hub edges carry
    ``hub_hub_weight``, hub-leaf edges ``hub_leaf_weight``.
    ``delta_hub`` is a scalar or one rate per hub. Defaults reproduce
    the bundled 20-node, 19-edge fixture.
    """
    hub_ids = tuple(int(h) for h in hub_ids)
    leaf_counts = tuple(int(c) for c in leaf_counts)
    if len(hub_ids) != 3 or len(leaf_counts) != 3:
        raise ValidationError("expected exactly three hubs and three leaf counts")
    if any(c < 0 for c in leaf_counts):
        raise ValidationError("leaf counts must be nonnegative")
    n = 3 + sum(leaf_counts)
    if len(set(hub_ids)) != 3 or any(not 1 <= h <= n for h in hub_ids):
        raise ValidationError(f"hub ids must be three distinct ids in 1..{n}")

    hubs = [h - 1 for h in hub_ids]
    leaf_pool = [i for i in range(n) if i not in set(hubs)]

    edges: list[tuple[int, int]] = [(hubs[0], hubs[1]), (hubs[1], hubs[2])]
    weights = [float(hub_hub_weight)] * 2
    offset = 0
    for hub, count in zip(hubs, leaf_counts):
        for leaf in leaf_pool[offset:offset + count]:
            edges.append((hub, leaf))
            weights.append(float(hub_leaf_weight))
        offset += count

    delta = np.full(n, float(delta_leaf))
    delta[hubs] = np.broadcast_to(np.asarray(delta_hub, dtype=float), (3,))
    return EpidemicNetwork(
        beta=float(beta), tau=float(tau), delta=delta,
        sigma=np.full(n, float(sigma)),
        edges=np.array(edges, dtype=int), weights=np.array(weights),
    )


def fixture_document() -> dict:
    """Parsed content of the bundled fixture file."""
    resource = importlib.resources.files("delaysis").joinpath(
        "data", FIXTURE_FILENAME
    )
    return json.loads(resource.read_text(encoding="utf-8"))
