"""Symmetric eigendecomposition, matrix functions, and the delay stability test.

The toolkit's analysis layer works entirely in the eigenbasis of the
symmetric system matrix. This module owns that decomposition (with a
deterministic ordering and sign convention so results are reproducible
bit-for-bit), scalar functions applied through it, and the two-sided
spectral stability test combining the decay-rate threshold with the
delay margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, SingularityError, ValidationError

__all__ = [
    "DEFAULT_EPSILON",
    "GUARD_BAND",
    "StabilityReport",
    "SystemMatrix",
    "check_stability",
    "delay_margin_bound",
    "eigendecompose",
    "matrix_function",
]

# Relative asymmetry above this rejects the input outright.
SYMMETRY_RTOL = 1e-12

# Half-width of the guard band around singular points of spectral
# functions (zero eigenvalues for inverses, 1 + sin(lambda*tau) for the
# delay kernel). Inside the stability box neither can trigger.
GUARD_BAND = 1e-9

# Default decay-rate threshold. Analyses that take an epsilon use this
# when the caller does not specify one.
DEFAULT_EPSILON = 0.01


class SystemMatrix:
    """A real symmetric matrix with a lazily cached eigendecomposition.

    Instances are immutable: the wrapped array is copied and marked
    read-only, and the decomposition is computed once on first access.
    """

    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError(f"system matrix must be square, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("system matrix contains non-finite entries")
        _require_symmetric(matrix)
        matrix.setflags(write=False)
        self._matrix = matrix
        self._eigenvalues: np.ndarray | None = None
        self._eigenvectors: np.ndarray | None = None

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def node_count(self) -> int:
        return self._matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in ascending order (cached)."""
        self._ensure_eig()
        return self._eigenvalues

    @property
    def eigenvectors(self) -> np.ndarray:
        """Orthonormal eigenvectors as columns, matching ``eigenvalues``."""
        self._ensure_eig()
        return self._eigenvectors

    def _ensure_eig(self) -> None:
        if self._eigenvalues is None:
            lam, vecs = eigendecompose(self._matrix)
            self._eigenvalues = lam
            self._eigenvectors = vecs

    def __repr__(self) -> str:
        return f"SystemMatrix(n={self.node_count})"


def _require_symmetric(matrix: np.ndarray) -> None:
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    asym = float(np.abs(matrix - matrix.T).max(initial=0.0))
    if asym > SYMMETRY_RTOL * scale:
        raise ValidationError(
            f"matrix is not symmetric: max asymmetry {asym:.3e} exceeds "
            f"{SYMMETRY_RTOL:.0e} relative tolerance"
        )


def eigendecompose(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum of a real symmetric matrix with deterministic output.

    Parameters
    ----------
    matrix : array_like or SystemMatrix
        Square real matrix, symmetric within 1e-12 relative tolerance.

    Returns
    -------
    eigenvalues : ndarray
        Ascending eigenvalues.
    eigenvectors : ndarray
        Orthonormal matrix whose column k belongs to ``eigenvalues[k]``.
        Each column is oriented so its largest-magnitude component is
        nonnegative (first such component on ties), which makes the
        basis reproducible across runs.
    """
    if isinstance(matrix, SystemMatrix):
        return matrix.eigenvalues, matrix.eigenvectors
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {matrix.shape}")
    _require_symmetric(matrix)
    sym = 0.5 * (matrix + matrix.T)
    try:
        lam, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition failed to converge: {exc}") from exc
    # Orient each eigenvector: largest-magnitude component nonnegative.
    anchor = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[anchor, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    lam = np.ascontiguousarray(lam)
    lam.setflags(write=False)
    vecs.setflags(write=False)
    return lam, vecs


def _as_system_matrix(M) -> SystemMatrix:
    return M if isinstance(M, SystemMatrix) else SystemMatrix(M)


def matrix_function(M, f) -> np.ndarray:
    """Apply a scalar function through the eigendecomposition.

    Returns ``Q diag(f(lambda)) Q^T`` for a symmetric input. ``f`` must
    accept an ndarray of eigenvalues and is expected to be finite at
    every one of them; a non-finite value means an eigenvalue sits on a
    singularity of ``f`` and raises :class:`SingularityError`.
    """
    M = _as_system_matrix(M)
    lam, vecs = M.eigenvalues, M.eigenvectors
    vals = np.asarray(f(lam), dtype=float)
    if vals.shape != lam.shape:
        raise ValidationError(
            f"scalar function returned shape {vals.shape}, expected {lam.shape}"
        )
    if not np.all(np.isfinite(vals)):
        bad = lam[~np.isfinite(vals)]
        raise SingularityError(
            f"scalar function is singular at eigenvalue(s) {bad.tolist()}"
        )
    return (vecs * vals) @ vecs.T


def guarded_reciprocal(values: np.ndarray, label: str) -> np.ndarray:
    """Reciprocal with the guard band enforced around zero."""
    values = np.asarray(values, dtype=float)
    if np.any(np.abs(values) < GUARD_BAND):
        raise SingularityError(
            f"{label} falls inside the {GUARD_BAND:.0e} guard band around zero"
        )
    return 1.0 / values


def delay_margin_bound(tau: float) -> float:
    """Lower spectral bound pi/(2*tau); infinite when tau == 0."""
    if tau < 0:
        raise ValidationError(f"delay must be nonnegative, got {tau}")
    if tau == 0:
        return math.inf
    return math.pi / (2.0 * tau)


@dataclass(frozen=True)
class StabilityReport:
    """Verdict and margins of the two-sided spectral stability test.

    The system dies out exponentially (rate at least ``epsilon``) when
    ``lambda_max <= -epsilon``, and tolerates the delay when
    ``lambda_min >= -pi/(2*tau)``. Both must hold for ``stable``.
    """

    lambda_min: float
    lambda_max: float
    epsilon: float
    tau: float
    delay_bound: float
    margin_upper: float
    margin_lower: float
    decay_ok: bool
    delay_ok: bool
    stable: bool

    def as_dict(self) -> dict:
        return {
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "epsilon": self.epsilon,
            "tau": self.tau,
            "delay_bound": self.delay_bound,
            "margin_upper": self.margin_upper,
            "margin_lower": self.margin_lower,
            "decay_ok": self.decay_ok,
            "delay_ok": self.delay_ok,
            "stable": self.stable,
        }


def check_stability(M, tau: float, epsilon: float = DEFAULT_EPSILON) -> StabilityReport:
    """Evaluate the spectral stability box for a given delay.

    Parameters
    ----------
    M : SystemMatrix or array_like
        Symmetric system matrix.
    tau : float
        Delay, nonnegative. ``tau == 0`` removes the lower bound.
    epsilon : float
        Decay-rate threshold, strictly positive.

    Returns
    -------
    StabilityReport
        Margins against both bounds and the combined verdict. Boundary
        cases count as stable (the bounds are inclusive).
    """
    if epsilon <= 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    M = _as_system_matrix(M)
    lam = M.eigenvalues
    lam_min = float(lam[0])
    lam_max = float(lam[-1])
    bound = delay_margin_bound(tau)
    margin_upper = -epsilon - lam_max
    margin_lower = math.inf if math.isinf(bound) else lam_min + bound
    decay_ok = lam_max <= -epsilon
    delay_ok = margin_lower >= 0
    return StabilityReport(
        lambda_min=lam_min,
        lambda_max=lam_max,
        epsilon=float(epsilon),
        tau=float(tau),
        delay_bound=bound,
        margin_upper=margin_upper,
        margin_lower=margin_lower,
        decay_ok=decay_ok,
        delay_ok=delay_ok,
        stable=bool(decay_ok and delay_ok),
    )
