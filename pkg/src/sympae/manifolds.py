"""Riemannian geometry and optimizers for the Stiefel and symplectic Stiefel manifolds.

Stiefel points ``Y`` are ``N x n`` with ``Y^T Y = I``. Symplectic Stiefel
points ``A`` are ``2N x 2n`` with ``A^T J A = J``. Only the Stiefel manifold
gets optimizers; the symplectic Stiefel geometry (gradient, metric,
tangency) is provided for checks.

The Stiefel Adam keeps its moments in the global tangent space
``g_hor = {[[A, -B^T], [B, 0]] : A skew (n x n), B ((N-n) x n)}``. A tangent
vector ``V`` at ``Y`` is mapped there by an orthogonal completion
``Q = [Y, Y_perp]``: ``Q^T V = [A; B]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DimensionError, ManifoldError
from .hamiltonian import poisson_apply, poisson_matrix, symplecticity_residual

__all__ = [
    "StiefelPoint",
    "SymplecticStiefelPoint",
    "StiefelTangent",
    "AdamState",
    "stiefel_residual",
    "stiefel_tangency_residual",
    "sp_tangency_residual",
    "project_stiefel_tangent",
    "riemannian_gradient_stiefel",
    "riemannian_gradient_sp",
    "metric_stiefel",
    "metric_sp",
    "retract_cayley",
    "gradient_descent_step",
    "adam_step_euclidean",
    "adam_step_stiefel",
    "adam_step_stiefel_projected",
    "orthogonal_completion",
    "global_tangent_lift",
    "global_tangent_to_tangent",
    "random_stiefel",
]

REPAIR_TOL = 1e-10
FAIL_TOL = 1e-8


def stiefel_residual(Y) -> float:
    Y = np.asarray(Y)
    return float(np.linalg.norm(Y.T @ Y - np.eye(Y.shape[1])))


def stiefel_tangency_residual(Y, V) -> float:
    S = np.asarray(Y).T @ np.asarray(V)
    return float(np.linalg.norm(S + S.T))


def sp_tangency_residual(A, V) -> float:
    S = np.asarray(A).T @ poisson_apply(np.asarray(V))
    return float(np.linalg.norm(S - S.T))


def random_stiefel(N, n, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    Q, R = np.linalg.qr(rng.normal(size=(N, n)))
    return Q * np.sign(np.diag(R))


@dataclass
class StiefelPoint:
    Y: np.ndarray

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim != 2 or self.Y.shape[0] < self.Y.shape[1]:
            raise DimensionError(f"Stiefel point must be N x n with N >= n, got {self.Y.shape}")
        res = stiefel_residual(self.Y)
        if res >= FAIL_TOL:
            raise ManifoldError(f"||Y^T Y - I||_F = {res:.3e} is not on the Stiefel manifold")

    @property
    def shape(self):
        return self.Y.shape

    def __array__(self, dtype=None, copy=None):
        return self.Y if dtype is None else self.Y.astype(dtype)


@dataclass
class SymplecticStiefelPoint:
    A: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        res = symplecticity_residual(self.A)
        if res >= 1e-8:
            raise ManifoldError(f"symplecticity residual {res:.3e} too large for Sp(2n, 2N)")


@dataclass
class StiefelTangent:
    base: StiefelPoint
    V: np.ndarray

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        if self.V.shape != self.base.Y.shape:
            raise DimensionError(f"tangent shape {self.V.shape} does not match base {self.base.Y.shape}")
        res = stiefel_tangency_residual(self.base.Y, self.V)
        if res >= FAIL_TOL * max(1.0, float(np.linalg.norm(self.V))):
            raise ManifoldError(f"tangency residual {res:.3e}")


def _Y(Y):
    return Y.Y if isinstance(Y, StiefelPoint) else np.asarray(Y, dtype=float)


def _A(A):
    return A.A if isinstance(A, SymplecticStiefelPoint) else np.asarray(A, dtype=float)


def _V(V):
    return V.V if isinstance(V, StiefelTangent) else np.asarray(V, dtype=float)


def project_stiefel_tangent(Y, X) -> np.ndarray:
    """Orthogonal (Euclidean) projection of ``X`` onto the tangent space at ``Y``."""
    Y = _Y(Y)
    S = Y.T @ X
    return X - Y @ (0.5 * (S + S.T))


def riemannian_gradient_stiefel(Y, euclid_grad) -> StiefelTangent:
    """``grad = G - Y G^T Y`` (canonical metric)."""
    point = Y if isinstance(Y, StiefelPoint) else StiefelPoint(Y)
    G = np.asarray(euclid_grad, dtype=float)
    if G.shape != point.Y.shape:
        raise DimensionError(f"gradient shape {G.shape} does not match point {point.Y.shape}")
    return StiefelTangent(point, G - point.Y @ (G.T @ point.Y))


def riemannian_gradient_sp(A, euclid_grad) -> np.ndarray:
    """``grad = G (A^T A) + J A (G^T J A)``."""
    A = _A(A)
    G = np.asarray(euclid_grad, dtype=float)
    if G.shape != A.shape:
        raise DimensionError(f"gradient shape {G.shape} does not match point {A.shape}")
    if A.shape[0] % 2 or A.shape[1] % 2:
        raise DimensionError("symplectic Stiefel points need even dimensions")
    JA = poisson_apply(A)
    return G @ (A.T @ A) + JA @ (G.T @ JA)


def metric_stiefel(Y, V1, V2, check=True) -> float:
    """Canonical metric ``Tr(V1^T (I - YY^T/2) V2)``."""
    Y, V1, V2 = _Y(Y), _V(V1), _V(V2)
    if check:
        for V in (V1, V2):
            if stiefel_tangency_residual(Y, V) > 1e-6 * max(1.0, np.linalg.norm(V)):
                raise ManifoldError("metric_stiefel called with a non-tangent vector")
    return float(np.sum(V1 * (V2 - 0.5 * Y @ (Y.T @ V2))))


def metric_sp(A, W1, W2, check=True) -> float:
    """``Tr(W1^T (I - J^T A (A^T A)^{-1} A^T J / 2) W2 (A^T A)^{-1})``."""
    A = _A(A)
    W1, W2 = np.asarray(W1, dtype=float), np.asarray(W2, dtype=float)
    if check:
        for W in (W1, W2):
            if sp_tangency_residual(A, W) > 1e-6 * max(1.0, np.linalg.norm(W)):
                raise ManifoldError("metric_sp called with a non-tangent vector")
    Ginv = np.linalg.inv(A.T @ A)
    J = poisson_matrix(A.shape[0])
    P = np.eye(A.shape[0]) - 0.5 * J.T @ A @ Ginv @ A.T @ J
    return float(np.trace(W1.T @ P @ W2 @ Ginv))


def _repair(Ynew):
    res = stiefel_residual(Ynew)
    if res <= REPAIR_TOL:
        return Ynew
    if res <= FAIL_TOL:
        Q, R = np.linalg.qr(Ynew)
        return Q * np.sign(np.diag(R))
    raise ManifoldError(f"retraction left the Stiefel manifold (residual {res:.3e})")


def retract_cayley(Y, V, scale: float = 1.0) -> StiefelPoint:
    """Cayley retraction ``(I - s/2 W)^{-1} (I + s/2 W) Y``.

    ``W = P V Y^T - Y (P V)^T`` with ``P = I - Y Y^T / 2`` satisfies ``W Y = V``
    for tangent ``V``, so the curve leaves ``Y`` with velocity ``V``. The
    ``N x N`` inverse is never formed; the Woodbury identity reduces it to a
    ``2n x 2n`` solve.
    """
    Yp = Y if isinstance(Y, StiefelPoint) else StiefelPoint(Y)
    Ym, Vm = Yp.Y, _V(V)
    if Vm.shape != Ym.shape:
        raise DimensionError("tangent and point shapes differ")
    if scale == 0:
        return StiefelPoint(Ym.copy())
    PV = Vm - 0.5 * Ym @ (Ym.T @ Vm)
    U = np.hstack([PV, Ym])
    R = np.hstack([Ym, -PV])
    n2 = U.shape[1]
    M = np.eye(n2) - 0.5 * scale * (R.T @ U)
    Ynew = Ym + scale * U @ np.linalg.solve(M, R.T @ Ym)
    return StiefelPoint(_repair(Ynew))


def gradient_descent_step(Y, euclid_grad, eta: float) -> StiefelPoint:
    """``Y <- retract(Y, -eta grad L)``."""
    grad = riemannian_gradient_stiefel(Y, euclid_grad)
    return retract_cayley(grad.base, grad.V, -eta)


@dataclass
class AdamState:
    """Adam cache. ``first_moment``/``second_moment`` live wherever the optimizer puts them."""

    eta: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.99
    delta: float = 1e-8
    step_count: int = 0
    first_moment: Optional[np.ndarray] = None
    second_moment: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.step_count < 0:
            raise ValueError("step_count must be >= 0")

    def copy(self):
        return AdamState(
            self.eta, self.beta1, self.beta2, self.delta, self.step_count,
            None if self.first_moment is None else self.first_moment.copy(),
            None if self.second_moment is None else self.second_moment.copy(),
        )


def _adam_moments(G, state: AdamState):
    """Moment update exactly as written in the algorithm; returns the new state and velocity."""
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    s = np.zeros_like(G) if state.first_moment is None else state.first_moment
    r = np.zeros_like(G) if state.second_moment is None else state.second_moment
    if s.shape != G.shape or r.shape != G.shape:
        raise DimensionError(f"cache shape {s.shape} does not match gradient {G.shape}")
    s = (b1 - b1**t) / (1 - b1**t) * s + (1 - b1) / (1 - b1**t) * G
    r = (b2 - b2**t) / (1 - b2**t) * r + (1 - b2) / (1 - b2**t) * (G * G)
    velocity = -state.eta * s / np.sqrt(r + state.delta)
    new = AdamState(state.eta, state.beta1, state.beta2, state.delta, t, s, r)
    return new, velocity


def adam_step_euclidean(theta, grad, state: AdamState):
    """One Adam step on an unconstrained parameter array; returns ``(theta', state')``."""
    theta = np.asarray(theta, dtype=float)
    G = np.asarray(grad, dtype=float)
    if G.shape != theta.shape:
        raise DimensionError(f"gradient shape {G.shape} does not match parameter {theta.shape}")
    new, velocity = _adam_moments(G, state)
    return theta + velocity, new


def orthogonal_completion(Y) -> np.ndarray:
    """``Q = [Y, Y_perp]`` orthogonal, from a complete Householder QR of ``Y``.

    The first ``n`` columns are ``Y`` itself; the rest are fixed by LAPACK's
    Householder reflectors, which is deterministic for a given input.
    """
    Y = _Y(Y)
    N, n = Y.shape
    Q, R = np.linalg.qr(Y, mode="complete")
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    Q[:, :n] *= d
    if np.linalg.norm(Q[:, :n] - Y) > 1e-8:
        raise ManifoldError("QR completion does not reproduce Y; is Y on the Stiefel manifold?")
    Q[:, :n] = Y
    return Q


def global_tangent_lift(Y, V, Q=None) -> np.ndarray:
    """Map a tangent ``V`` at ``Y`` to the stacked ``[A; B]`` (``N x n``) of ``g_hor``.

    The top ``n x n`` block ``A`` is skew; the full ``N x N`` element is
    ``[[A, -B^T], [B, 0]]``, which this compact form determines.
    """
    Y, V = _Y(Y), _V(V)
    Q = orthogonal_completion(Y) if Q is None else Q
    n = Y.shape[1]
    C = Q.T @ V
    A = C[:n]
    C[:n] = 0.5 * (A - A.T)
    return C


def global_tangent_to_tangent(Y, C, Q=None) -> np.ndarray:
    """Inverse of :func:`global_tangent_lift`: ``V = Q C``."""
    Y = _Y(Y)
    Q = orthogonal_completion(Y) if Q is None else Q
    return Q @ C


def global_tangent_matrix(C, n) -> np.ndarray:
    """Expand the compact ``[A; B]`` into the full skew ``N x N`` element of ``g_hor``."""
    N = C.shape[0]
    X = np.zeros((N, N))
    X[:, :n] = C
    X[:n, n:] = -C[n:].T
    return X


def adam_step_stiefel(Y, euclid_grad, state: AdamState):
    """Adam on St(n, N) with the cache in the global tangent space.

    1. Riemannian gradient at ``Y``.
    2. Lift it to ``g_hor`` and run the elementwise Adam update there.
    3. Map the velocity back to ``T_Y`` and take a Cayley step.
    """
    grad = riemannian_gradient_stiefel(Y, euclid_grad)
    Y = grad.base
    Q = orthogonal_completion(Y)
    B = global_tangent_lift(Y, grad.V, Q)
    new, velocity = _adam_moments(B, state)
    n = Y.Y.shape[1]
    # s skew and r symmetric in the top block, so the quotient stays skew; symmetrize against rounding
    top = velocity[:n]
    velocity[:n] = 0.5 * (top - top.T)
    V = global_tangent_to_tangent(Y, velocity, Q)
    return retract_cayley(Y, V, 1.0), new


def adam_step_stiefel_projected(Y, euclid_grad, state: AdamState):
    """Fallback Adam: cache as an ``N x n`` matrix, velocity projected to ``T_Y``, then retracted."""
    grad = riemannian_gradient_stiefel(Y, euclid_grad)
    new, velocity = _adam_moments(grad.V, state)
    V = project_stiefel_tangent(grad.base, velocity)
    return retract_cayley(grad.base, V, 1.0), new
