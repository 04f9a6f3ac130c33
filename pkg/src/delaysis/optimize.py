"""Traffic-volume reallocation under spectral stability constraints.

Edge weights are redistributed under a fixed total budget so that the
network stays inside the spectral stability box while the steady-state
noise amplification (its smooth surrogate, see performance.py) becomes
as small as possible. Two flavors:

* optimal: minimize the surrogate for a fixed noise profile.
* robust: minimize the worst case over all noise allocations with
  sum(sigma_i^2) = n, which concentrates on one node, so the outer
  problem is a min-max over per-node sensitivities.

Both are convex and solved by a log-barrier interior-point method with
analytic gradients and Hessians; the budget equality is handled by a
Newton step projected onto the affine subspace sum(w) = budget. The
robust max is smoothed with log-sum-exp whose temperature anneals
alongside the barrier parameter; the reported objective is always the
true maximum at the returned weights.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    InfeasibleError,
    SingularityError,
    UnstableSystemError,
    ValidationError,
)
from .network import EpidemicNetwork, assemble_system_matrix
from .performance import (
    FIT_C0,
    FIT_C1,
    CentralityVector,
    NoiseKind,
    NoiseModel,
    centrality,
    performance_closed_form,
)
from .spectral import DEFAULT_EPSILON, GUARD_BAND, delay_margin_bound

__all__ = [
    "MU_SCHEDULE",
    "SWEEP_COLUMNS",
    "OptimizationKind",
    "OptimizationProblem",
    "OptimizationResult",
    "SweepRow",
    "WorstCaseNoise",
    "budget_feasibility_ceiling",
    "gradient_objective",
    "inner_worst_case",
    "objective_value",
    "solve_optimal",
    "solve_robust",
    "sweep_budget",
]

# barrier parameter schedule, 1.0 down to 1e-8
MU_SCHEDULE = tuple(10.0 ** -k for k in range(9))
# log-sum-exp temperature floor, as a fraction of the value scale
_TEMPERATURE_FLOOR = 1e-4
_ARMIJO_SLOPE = 1e-4
_ARMIJO_FACTOR = 0.5
_MAX_NEWTON_PER_STAGE = 120
_KKT_REQUIRED = 1e-6


class OptimizationKind(enum.Enum):
    OPTIMAL = "optimal"
    ROBUST = "robust"

    @classmethod
    def parse(cls, text: str) -> "OptimizationKind":
        for kind in cls:
            if str(text).lower() == kind.value:
                return kind
        choices = ", ".join(k.value for k in cls)
        raise ValidationError(f"unknown optimization kind {text!r}, expected: {choices}")


@dataclass(frozen=True)
class OptimizationProblem:
    """Reallocation problem over the edge weights of ``network``.

    ``budget`` defaults to the network's own total weight, ``tau`` to
    the network's delay. ``noise`` (optimal kind only) defaults to
    direct per-node forcing with the network's sigma field; only that
    direct-forcing kind keeps the surrogate objective convex, so it is
    the only one accepted here.
    """

    network: EpidemicNetwork
    kind: OptimizationKind = OptimizationKind.OPTIMAL
    noise: NoiseModel | None = None
    budget: float | None = None
    epsilon: float = DEFAULT_EPSILON
    tau: float | None = None

    def __post_init__(self):
        if not isinstance(self.kind, OptimizationKind):
            object.__setattr__(self, "kind", OptimizationKind.parse(self.kind))
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        tau = self.network.tau if self.tau is None else float(self.tau)
        if not (np.isfinite(tau) and tau >= 0):
            raise ValidationError(f"tau must be finite and nonnegative, got {tau}")
        object.__setattr__(self, "tau", tau)

        if self.network.edge_count == 0:
            budget = 0.0
        else:
            budget = self.network.total_weight if self.budget is None else float(self.budget)
            if not (np.isfinite(budget) and budget > 0):
                raise ValidationError(f"budget must be positive, got {budget}")
        object.__setattr__(self, "budget", budget)

        if self.kind is OptimizationKind.OPTIMAL:
            noise = self.noise
            if noise is None:
                noise = NoiseModel(NoiseKind.MODELING, self.network.sigma)
            if noise.kind is not NoiseKind.MODELING:
                raise ValidationError(
                    "optimal reallocation supports direct (modeling) noise only: "
                    "filtered noise makes the surrogate objective non-convex "
                    "in the edge weights"
                )
            if noise.sigma.shape[0] != self.network.node_count:
                raise ValidationError("noise vector length does not match the network")
            object.__setattr__(self, "noise", noise)
        elif self.noise is not None:
            raise ValidationError(
                "robust problems choose the worst-case noise internally; "
                "leave noise unset"
            )


@dataclass(frozen=True)
class WorstCaseNoise:
    """Concentrated allocation attaining the inner maximum."""

    sigma_squared: np.ndarray
    value: float
    index: int


def inner_worst_case(eta, n: int) -> WorstCaseNoise:
    """Maximize sum(eta_i * sigma_i^2) over sigma^2 >= 0, sum = n.

    Linear objective: the maximum sits on a vertex of the simplex, so
    everything concentrates on the largest sensitivity. Ties go to the
    lowest node index.
    """
    values = eta.eta if isinstance(eta, CentralityVector) else eta
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise ValidationError("sensitivities must be a non-empty finite vector")
    n = int(n)
    if n <= 0:
        raise ValidationError(f"allocation scale n must be positive, got {n}")
    index = int(np.argmax(values))
    sigma_squared = np.zeros(values.size)
    sigma_squared[index] = float(n)
    sigma_squared.setflags(write=False)
    return WorstCaseNoise(
        sigma_squared=sigma_squared, value=float(n * values[index]), index=index
    )


@dataclass(frozen=True)
class OptimizationResult:
    kind: OptimizationKind
    weights: np.ndarray
    objective: float
    exact_rho: float | None
    baseline_rho: float | None
    improvement_pct: int | None
    iterations: int
    kkt_residual: float
    feasibility: dict

    def as_document(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "objective": self.objective,
            "exact_rho": self.exact_rho,
            "baseline_rho": self.baseline_rho,
            "improvement_pct": self.improvement_pct,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
        }


# ---------------------------------------------------------------------------
# Shared evaluation pieces


@dataclass
class _Workspace:
    n: int
    m: int
    beta: float
    tau: float
    epsilon: float
    bound: float  # pi/(2 tau), inf when tau == 0
    delta: np.ndarray
    ia: np.ndarray
    ib: np.ndarray
    sigma_sq: np.ndarray | None


def _workspace(prob: OptimizationProblem) -> _Workspace:
    net = prob.network
    return _Workspace(
        n=net.node_count,
        m=net.edge_count,
        beta=net.beta,
        tau=prob.tau,
        epsilon=prob.epsilon,
        bound=delay_margin_bound(prob.tau),
        delta=net.delta,
        ia=net.edges[:, 0],
        ib=net.edges[:, 1],
        sigma_sq=None if prob.noise is None else prob.noise.sigma ** 2,
    )


def _eig(ws: _Workspace, w: np.ndarray):
    M = np.zeros((ws.n, ws.n))
    M[ws.ia, ws.ib] = ws.beta * w
    M += M.T
    M[np.diag_indices(ws.n)] = -ws.delta
    return np.linalg.eigh(M)


def _box_margins(ws: _Workspace, lam: np.ndarray) -> tuple[float, float]:
    decay = -ws.epsilon - lam[-1]
    delay = lam[0] + ws.bound if np.isfinite(ws.bound) else np.inf
    return float(decay), float(delay)


def _strictly_interior(ws: _Workspace, lam: np.ndarray, w: np.ndarray) -> bool:
    decay, delay = _box_margins(ws, lam)
    return decay > 0 and delay > 0 and (w.size == 0 or w.min() > 0)


def _barrier_value(ws: _Workspace, lam: np.ndarray, w: np.ndarray) -> float:
    val = -np.log(-lam - ws.epsilon).sum() - np.log(w).sum()
    if np.isfinite(ws.bound):
        val -= np.log(lam + ws.bound).sum()
    return float(val)


def _surrogate_weights(ws: _Workspace, lam: np.ndarray) -> np.ndarray:
    """Per-mode factor h(lam) of the surrogate objective."""
    return (
        -1.0 / lam
        + (4.0 * ws.tau / np.pi) / (np.pi / 2 + ws.tau * lam)
        - FIT_C1 * ws.tau ** 2 * lam
        + 0.5 * FIT_C0 * ws.tau
    )


def _optimal_value(ws: _Workspace, lam: np.ndarray, Q: np.ndarray) -> float:
    phi = (Q ** 2).T @ ws.sigma_sq
    return float(0.5 * phi @ _surrogate_weights(ws, lam))


def _node_values(ws: _Workspace, lam: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Robust per-node values v_i = n * (approximate sensitivity of node i)."""
    qsq = Q ** 2
    d1 = qsq @ (-1.0 / lam)
    d2 = qsq @ (1.0 / (np.pi / 2 + ws.tau * lam))
    return 0.5 * ws.n * (
        d1 + (4.0 * ws.tau / np.pi) * d2 + FIT_C1 * ws.tau ** 2 * ws.delta
        + 0.5 * FIT_C0 * ws.tau
    )


def _smooth_max(v: np.ndarray, temperature: float):
    """Log-sum-exp smoothing of max(v) and its weights."""
    shifted = (v - v.max()) / temperature
    e = np.exp(shifted)
    total = e.sum()
    return float(v.max() + temperature * np.log(total)), e / total


def _resolvents(ws: _Workspace, lam: np.ndarray, Q: np.ndarray):
    X1 = (Q * (-1.0 / lam)) @ Q.T
    X2 = (Q * (1.0 / (np.pi / 2 + ws.tau * lam))) @ Q.T
    return X1, X2


def _pair_hessian(U: np.ndarray, X: np.ndarray, ia: np.ndarray, ib: np.ndarray) -> np.ndarray:
    """Edge-pair second derivatives of resolvent traces.

    For f with df/dw_e = const * U[a_e, b_e] and U built from X-type
    resolvents, the chain rule expands into four index patterns; this
    returns their sum for all edge pairs at once.
    """
    return (
        U[np.ix_(ia, ia)] * X[np.ix_(ib, ib)]
        + U[np.ix_(ia, ib)] * X[np.ix_(ib, ia)]
        + U[np.ix_(ib, ia)] * X[np.ix_(ia, ib)]
        + U[np.ix_(ib, ib)] * X[np.ix_(ia, ia)]
    )


def _trace_grad_hess(ws: _Workspace, X1: np.ndarray, X2: np.ndarray,
                     node_weights: np.ndarray):
    """Gradient and Hessian of the surrogate trace objective.

    ``node_weights`` is the diagonal of the noise covariance. The
    tau^2-linear surrogate term differentiates to S[a,b], which is zero
    off-diagonal, so it never contributes here.
    """
    ia, ib = ws.ia, ws.ib
    U = (X1 * node_weights) @ X1
    V = (X2 * node_weights) @ X2
    coef = 4.0 * ws.tau ** 2 / np.pi
    grad = ws.beta * (U[ia, ib] - coef * V[ia, ib])
    hess = ws.beta ** 2 * _pair_hessian(U, X1, ia, ib)
    if ws.tau > 0:
        hess = hess + (4.0 * ws.tau ** 3 * ws.beta ** 2 / np.pi) * _pair_hessian(V, X2, ia, ib)
    return grad, hess


def _barrier_grad_hess(ws: _Workspace, lam: np.ndarray, Q: np.ndarray, w: np.ndarray):
    ia, ib = ws.ia, ws.ib
    Pinv = (Q * (1.0 / (-lam - ws.epsilon))) @ Q.T
    grad = 2.0 * ws.beta * Pinv[ia, ib] - 1.0 / w
    hess = ws.beta ** 2 * _pair_hessian(Pinv, Pinv, ia, ib) + np.diag(1.0 / w ** 2)
    if np.isfinite(ws.bound):
        Rinv = (Q * (1.0 / (lam + ws.bound))) @ Q.T
        grad = grad - 2.0 * ws.beta * Rinv[ia, ib]
        hess = hess + ws.beta ** 2 * _pair_hessian(Rinv, Rinv, ia, ib)
    return grad, hess


class _TraceObjective:
    """Fixed-noise surrogate objective (optimal kind)."""

    def set_stage(self, mu: float) -> None:
        pass

    def value(self, ws, lam, Q) -> float:
        return _optimal_value(ws, lam, Q)

    def grad_hess(self, ws, lam, Q, w):
        X1, X2 = _resolvents(ws, lam, Q)
        return _trace_grad_hess(ws, X1, X2, ws.sigma_sq)


class _SmoothMaxObjective:
    """Annealed log-sum-exp of the per-node values (robust kind)."""

    def __init__(self, value_scale: float):
        self.value_scale = max(value_scale, 1e-10)
        self.temperature = self.value_scale

    def set_stage(self, mu: float) -> None:
        self.temperature = max(mu, _TEMPERATURE_FLOOR) * self.value_scale

    def value(self, ws, lam, Q) -> float:
        smooth, _ = _smooth_max(_node_values(ws, lam, Q), self.temperature)
        return smooth

    def grad_hess(self, ws, lam, Q, w):
        X1, X2 = _resolvents(ws, lam, Q)
        v = _node_values(ws, lam, Q)
        _, s = _smooth_max(v, self.temperature)
        coef = 4.0 * ws.tau ** 2 / np.pi
        J = ws.n * ws.beta * (
            X1[:, ws.ia] * X1[:, ws.ib] - coef * X2[:, ws.ia] * X2[:, ws.ib]
        )
        grad = J.T @ s
        _, hess_trace = _trace_grad_hess(ws, X1, X2, ws.n * s)
        curvature = (J.T @ (J * s[:, None]) - np.outer(grad, grad)) / self.temperature
        return grad, hess_trace + curvature


# ---------------------------------------------------------------------------
# Interior-point driver


def _kkt_step(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Newton step of min g.dw + dw.H.dw/2 subject to sum(dw) = 0."""
    m = g.shape[0]
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = H
    K[:m, m] = 1.0
    K[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[:m] = -g
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        K[:m, :m] += np.eye(m) * max(1e-10 * abs(np.trace(H)) / m, 1e-12)
        sol = np.linalg.solve(K, rhs)
    return sol[:m]


def _total_value(ws, w, mu, obj) -> float:
    if w.min() <= 0:
        return np.inf
    lam, Q = _eig(ws, w)
    if not _strictly_interior(ws, lam, w):
        return np.inf
    return obj.value(ws, lam, Q) + mu * _barrier_value(ws, lam, w)


def _newton_stage(ws, w, mu, obj, tol):
    """Minimize obj + mu*barrier on the budget plane from w."""
    iterations = 0
    residual = np.inf
    for _ in range(_MAX_NEWTON_PER_STAGE):
        lam, Q = _eig(ws, w)
        g_obj, H_obj = obj.grad_hess(ws, lam, Q, w)
        g_phi, H_phi = _barrier_grad_hess(ws, lam, Q, w)
        g = g_obj + mu * g_phi
        H = H_obj + mu * H_phi
        residual = float(np.abs(g - g.mean()).max())
        if residual <= tol:
            break
        dw = _kkt_step(H, g)
        slope = float(g @ dw)
        if slope >= 0:
            # convexity makes this a numerical breakdown; regularize once
            dw = _kkt_step(H + np.eye(ws.m) * max(abs(np.trace(H)) * 1e-8 / ws.m, 1e-12), g)
            slope = float(g @ dw)
            if slope >= 0:
                break
        current = obj.value(ws, lam, Q) + mu * _barrier_value(ws, lam, w)
        step = 1.0
        moved = False
        while step >= 1e-14:
            trial = w + step * dw
            if _total_value(ws, trial, mu, obj) <= current + _ARMIJO_SLOPE * step * slope:
                moved = True
                break
            step *= _ARMIJO_FACTOR
        if not moved:
            break
        w = w + step * dw
        iterations += 1
    return w, iterations, residual


def _run_barrier(ws, w0, obj):
    lam0, Q0 = _eig(ws, w0)
    g0, _ = obj.grad_hess(ws, lam0, Q0, w0)
    scale = max(1.0, float(np.abs(g0).max()))
    tol_final = min(max(1e-9 * scale, 1e-12), 5e-7)

    w = w0
    total_iterations = 0
    residual = np.inf
    for mu in MU_SCHEDULE:
        obj.set_stage(mu)
        tol = max(1e-3 * mu * scale, tol_final)
        w, iterations, residual = _newton_stage(ws, w, mu, obj, tol)
        total_iterations += iterations
    if residual > _KKT_REQUIRED:
        raise ConvergenceError(
            f"stationarity residual {residual:.3e} stayed above {_KKT_REQUIRED:.0e} "
            "after the barrier schedule"
        )
    return w, total_iterations, residual


def _initial_point(ws: _Workspace, net: EpidemicNetwork, budget: float) -> np.ndarray:
    """First strictly feasible candidate: uniform, then scaled baseline."""
    uniform = np.full(ws.m, budget / ws.m)
    candidates = [uniform]
    if net.total_weight > 0:
        scaled = net.weights * (budget / net.total_weight)
        if scaled.min() <= 0:
            # zero-weight edges sit on the barrier; nudge toward uniform
            scaled = 0.999 * scaled + 0.001 * uniform
        candidates.append(scaled)
    for w in candidates:
        lam, _ = _eig(ws, w)
        if _strictly_interior(ws, lam, w):
            return w

    lam, _ = _eig(ws, uniform)
    decay, delay = _box_margins(ws, lam)
    complaints = []
    if decay <= 0:
        complaints.append(
            f"decay bound: largest eigenvalue {lam[-1]:.6g} exceeds -epsilon = {-ws.epsilon:.6g}"
        )
    if delay <= 0:
        complaints.append(
            f"delay bound: smallest eigenvalue {lam[0]:.6g} is below {-ws.bound:.6g}"
        )
    detail = "; ".join(complaints) if complaints else "no strictly positive weight vector found"
    raise InfeasibleError(f"budget {budget:.6g} admits no strictly feasible start ({detail})")


# ---------------------------------------------------------------------------
# Result assembly


def _exact_rho_or_none(net, weights, tau, noise):
    try:
        M = assemble_system_matrix(net, weights=weights)
        return float(performance_closed_form(M, noise, tau).rho_ss)
    except (UnstableSystemError, SingularityError):
        return None


def _exact_worst_or_none(net, weights, tau):
    try:
        M = assemble_system_matrix(net, weights=weights)
        eta = centrality(M, NoiseKind.MODELING, tau)
        return float(inner_worst_case(eta, net.node_count).value)
    except (UnstableSystemError, SingularityError):
        return None


def _improvement(baseline, optimized):
    if baseline is None or optimized is None or baseline <= 0:
        return None
    return int(round((baseline - optimized) / baseline * 100.0))


def _feasibility_report(ws, w, budget) -> dict:
    lam, _ = _eig(ws, w)
    decay, delay = _box_margins(ws, lam)
    return {
        "min_weight": float(w.min()) if w.size else 0.0,
        "budget_residual": float(abs(w.sum() - budget)),
        "decay_margin": decay,
        "delay_margin": delay,
    }


def _finish(prob, ws, weights, objective, iterations, residual) -> OptimizationResult:
    net = prob.network
    if prob.kind is OptimizationKind.OPTIMAL:
        exact = _exact_rho_or_none(net, weights, prob.tau, prob.noise)
        base = _exact_rho_or_none(net, net.weights, prob.tau, prob.noise)
    else:
        exact = _exact_worst_or_none(net, weights, prob.tau)
        base = _exact_worst_or_none(net, net.weights, prob.tau)
    weights = np.array(weights, dtype=float)
    weights.setflags(write=False)
    return OptimizationResult(
        kind=prob.kind,
        weights=weights,
        objective=float(objective),
        exact_rho=exact,
        baseline_rho=base,
        improvement_pct=_improvement(base, exact),
        iterations=int(iterations),
        kkt_residual=float(residual),
        feasibility=_feasibility_report(ws, weights, prob.budget),
    )


def _final_objective(ws, prob, w) -> float:
    lam, Q = _eig(ws, w)
    if prob.kind is OptimizationKind.OPTIMAL:
        return _optimal_value(ws, lam, Q)
    return float(_node_values(ws, lam, Q).max())


def _solve(prob: OptimizationProblem) -> OptimizationResult:
    ws = _workspace(prob)
    net = prob.network

    if ws.m == 0:
        # nothing to reallocate; report the baseline if it is admissible
        lam, _ = _eig(ws, np.zeros(0))
        if not _strictly_interior(ws, lam, np.zeros(0)):
            raise InfeasibleError("the edgeless network violates the spectral box")
        objective = _final_objective(ws, prob, np.zeros(0))
        return _finish(prob, ws, np.zeros(0), objective, 0, 0.0)

    if ws.m == 1:
        # the budget constraint pins the single weight outright
        w = np.array([prob.budget])
        lam, _ = _eig(ws, w)
        decay, delay = _box_margins(ws, lam)
        if decay < -1e-8 or delay < -1e-8:
            raise InfeasibleError(
                f"forced weight {prob.budget:.6g} violates the spectral box "
                f"(decay margin {decay:.3g}, delay margin {delay:.3g})"
            )
        return _finish(prob, ws, w, _final_objective(ws, prob, w), 0, 0.0)

    w0 = _initial_point(ws, net, prob.budget)
    if prob.kind is OptimizationKind.OPTIMAL:
        obj = _TraceObjective()
    else:
        lam0, Q0 = _eig(ws, w0)
        obj = _SmoothMaxObjective(float(np.abs(_node_values(ws, lam0, Q0)).max()))
    w, iterations, residual = _run_barrier(ws, w0, obj)
    return _finish(prob, ws, w, _final_objective(ws, prob, w), iterations, residual)


def solve_optimal(prob: OptimizationProblem) -> OptimizationResult:
    """Minimize the fixed-noise surrogate over the budget polytope."""
    if prob.kind is not OptimizationKind.OPTIMAL:
        raise ValidationError("solve_optimal needs a problem of kind 'optimal'")
    return _solve(prob)


def solve_robust(prob: OptimizationProblem) -> OptimizationResult:
    """Minimize the worst per-node sensitivity over the budget polytope."""
    if prob.kind is not OptimizationKind.ROBUST:
        raise ValidationError("solve_robust needs a problem of kind 'robust'")
    return _solve(prob)


# ---------------------------------------------------------------------------
# Direct evaluation helpers (used by tests and the CLI)


def _gated_eig(ws: _Workspace, w: np.ndarray):
    lam, Q = _eig(ws, w)
    if lam[-1] > -GUARD_BAND:
        raise UnstableSystemError(
            f"largest eigenvalue {lam[-1]:.6g} is not negative at these weights"
        )
    if np.isfinite(ws.bound) and lam[0] <= -ws.bound:
        raise UnstableSystemError(
            f"smallest eigenvalue {lam[0]:.6g} fell beyond the delay margin "
            f"{-ws.bound:.6g}"
        )
    return lam, Q


def _check_weights(ws: _Workspace, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != ws.m or not np.all(np.isfinite(w)):
        raise ValidationError(f"expected {ws.m} finite edge weights")
    return w


def objective_value(weights, prob: OptimizationProblem) -> float:
    """Objective of ``prob`` at explicit weights.

    For the optimal kind this is the surrogate trace value; for the
    robust kind the true (unsmoothed) maximum per-node value.
    """
    ws = _workspace(prob)
    w = _check_weights(ws, weights)
    lam, Q = _gated_eig(ws, w)
    if prob.kind is OptimizationKind.OPTIMAL:
        return _optimal_value(ws, lam, Q)
    return float(_node_values(ws, lam, Q).max())


def gradient_objective(weights, prob: OptimizationProblem) -> np.ndarray:
    """Analytic gradient of the surrogate trace objective.

    Defined for the optimal kind; the robust objective is a max and is
    smoothed only inside the solver. Weights must sit strictly inside
    the spectral box, where the resolvents are well conditioned.
    """
    if prob.kind is not OptimizationKind.OPTIMAL:
        raise ValidationError("gradient_objective applies to the optimal kind only")
    ws = _workspace(prob)
    w = _check_weights(ws, weights)
    lam, Q = _eig(ws, w)
    decay, delay = _box_margins(ws, lam)
    if decay <= 0 or delay <= 0:
        raise SingularityError(
            f"weights sit outside or on the spectral box boundary "
            f"(decay margin {decay:.3g}, delay margin {delay:.3g})"
        )
    X1, X2 = _resolvents(ws, lam, Q)
    grad, _ = _trace_grad_hess(ws, X1, X2, ws.sigma_sq)
    return grad


# ---------------------------------------------------------------------------
# Budget sweep


SWEEP_COLUMNS = (
    "c",
    "rho_orig_uniform",
    "rho_opt_uniform",
    "rho_rob_uniform",
    "rho_orig_worst",
    "rho_opt_worst",
    "rho_rob_worst",
    "feasible",
)


@dataclass(frozen=True)
class SweepRow:
    c: float
    rho_orig_uniform: float
    rho_opt_uniform: float
    rho_rob_uniform: float
    rho_orig_worst: float
    rho_opt_worst: float
    rho_rob_worst: float
    feasible: bool

    def as_tuple(self):
        return (
            self.c,
            self.rho_orig_uniform,
            self.rho_opt_uniform,
            self.rho_rob_uniform,
            self.rho_orig_worst,
            self.rho_opt_worst,
            self.rho_rob_worst,
            self.feasible,
        )


def _exact_metrics(net, weights, tau):
    """(uniform-noise rho, worst-case rho) at given weights, or NaNs."""
    try:
        M = assemble_system_matrix(net, weights=weights)
        ones = NoiseModel(NoiseKind.MODELING, np.ones(net.node_count))
        rho_uniform = float(performance_closed_form(M, ones, tau).rho_ss)
        eta = centrality(M, NoiseKind.MODELING, tau)
        rho_worst = float(inner_worst_case(eta, net.node_count).value)
    except (UnstableSystemError, SingularityError):
        return np.nan, np.nan
    return rho_uniform, rho_worst


def _sweep_one(net, epsilon, tau, budget) -> SweepRow:
    uniform_sigma = NoiseModel(NoiseKind.MODELING, np.ones(net.node_count))
    orig = net.weights * (budget / net.total_weight) if net.total_weight > 0 else net.weights
    orig_uniform, orig_worst = _exact_metrics(net, orig, tau)
    try:
        res_opt = solve_optimal(OptimizationProblem(
            net, kind=OptimizationKind.OPTIMAL, noise=uniform_sigma,
            budget=budget, epsilon=epsilon, tau=tau,
        ))
        res_rob = solve_robust(OptimizationProblem(
            net, kind=OptimizationKind.ROBUST,
            budget=budget, epsilon=epsilon, tau=tau,
        ))
    except InfeasibleError:
        return SweepRow(budget, orig_uniform, np.nan, np.nan,
                        orig_worst, np.nan, np.nan, False)
    opt_uniform, opt_worst = _exact_metrics(net, res_opt.weights, tau)
    rob_uniform, rob_worst = _exact_metrics(net, res_rob.weights, tau)
    return SweepRow(budget, orig_uniform, opt_uniform, rob_uniform,
                    orig_worst, opt_worst, rob_worst, True)


def sweep_budget(net: EpidemicNetwork, budgets, epsilon: float = DEFAULT_EPSILON,
                 tau: float | None = None) -> list[SweepRow]:
    """Optimal and robust reallocation across a list of budgets.

    Each budget is solved independently (infeasible ones are flagged,
    not fatal) and rows come back in the input order. Performance is
    reported under uniform unit noise and under the worst-case
    concentrated allocation.
    """
    if net.edge_count == 0:
        raise ValidationError("budget sweep needs a network with edges")
    budgets = [float(c) for c in budgets]
    if not budgets:
        raise ValidationError("no budgets given")
    if any(not np.isfinite(c) or c <= 0 for c in budgets):
        raise ValidationError("budgets must be positive and finite")
    tau = net.tau if tau is None else float(tau)

    if len(budgets) == 1:
        return [_sweep_one(net, epsilon, tau, budgets[0])]
    workers = min(len(budgets), os.cpu_count() or 1, 8)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: _sweep_one(net, epsilon, tau, c), budgets))


def budget_feasibility_ceiling(net: EpidemicNetwork, epsilon: float = DEFAULT_EPSILON,
                               tau: float | None = None) -> float:
    """Largest budget (by bisection) that still admits a feasible start."""
    if net.edge_count == 0:
        raise ValidationError("feasibility ceiling needs a network with edges")
    prob_tau = net.tau if tau is None else float(tau)
    probe = OptimizationProblem(net, kind=OptimizationKind.ROBUST,
                                epsilon=epsilon, tau=prob_tau)
    ws = _workspace(probe)

    def feasible(c: float) -> bool:
        try:
            _initial_point(ws, net, c)
        except InfeasibleError:
            return False
        return True

    low = net.total_weight if net.total_weight > 0 else 1.0
    for _ in range(80):
        if feasible(low):
            break
        low /= 2.0
    else:
        raise InfeasibleError("no feasible budget found at any tried scale")

    high = low
    for _ in range(80):
        if not feasible(2.0 * high):
            break
        high *= 2.0
    else:
        return high

    lo, hi = high, 2.0 * high
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo
