"""Canonical Hamiltonian systems, the Poisson matrix and the two reference FOMs.

State vectors are always laid out as ``z = (q, p)``, q-block first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import DimensionError

__all__ = [
    "PhaseVector",
    "HamiltonianSystem",
    "OscillatorFOM",
    "LinearWaveFOM",
    "poisson_matrix",
    "poisson_apply",
    "hamiltonian_vector_field",
    "assemble_wave_K",
    "wave_hamiltonian",
    "wave_vector_field",
    "wave_grid",
    "spline_h",
    "spline_h_derivative",
    "wave_initial_condition",
    "symplecticity_residual",
]


def _half(n: int, what: str = "vector") -> int:
    if n % 2:
        raise DimensionError(f"{what} has odd length {n}; expected (q, p) of equal size")
    return n // 2


@dataclass(frozen=True)
class PhaseVector:
    """A point ``(q, p)`` in ``R^{2N}``."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.shape != p.shape or q.ndim != 1:
            raise DimensionError(f"q and p must be 1-d of equal length, got {q.shape} and {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_array(cls, z) -> "PhaseVector":
        z = np.asarray(z, dtype=float)
        n = _half(z.shape[0])
        return cls(z[:n], z[n:])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @property
    def N(self) -> int:
        return self.q.shape[0]


def _as_state(z) -> np.ndarray:
    if isinstance(z, PhaseVector):
        return z.to_array()
    return np.asarray(z, dtype=float)


def poisson_matrix(n2: int) -> np.ndarray:
    """Dense ``J_{2N} = [[0, I], [-I, 0]]``. Only used by tests and small diagnostics."""
    N = _half(n2, "Poisson matrix")
    J = np.zeros((n2, n2))
    J[:N, N:] = np.eye(N)
    J[N:, :N] = -np.eye(N)
    return J


def poisson_apply(z) -> np.ndarray:
    """Apply ``J_{2N}`` along the first axis without forming the matrix.

    ``(q, p) -> (p, -q)``. Works on a single state or on a ``(2N, k)`` stack of columns.
    """
    z = _as_state(z)
    N = _half(z.shape[0])
    return np.concatenate([z[N:], -z[:N]], axis=0)


@dataclass(frozen=True)
class HamiltonianSystem:
    """A canonical Hamiltonian system on ``R^{2N}``.

    ``hamiltonian`` and ``gradient`` take a flat state array of length ``2N``.
    """

    N: int
    hamiltonian: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    parameter: float = float("nan")

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")

    def vector_field(self, t: float, z) -> np.ndarray:
        return hamiltonian_vector_field(self, z)

    def __call__(self, t: float, z) -> np.ndarray:
        return self.vector_field(t, z)


def hamiltonian_vector_field(sys: HamiltonianSystem, z) -> np.ndarray:
    """``V_H(z) = J ∇H(z)``, i.e. ``qdot = dH/dp`` and ``pdot = -dH/dq``."""
    z = _as_state(z)
    if z.shape[0] != 2 * sys.N:
        raise DimensionError(f"state has length {z.shape[0]}, system expects {2 * sys.N}")
    return poisson_apply(sys.gradient(z))


@dataclass(frozen=True)
class OscillatorFOM:
    """Uncoupled harmonic oscillators ``H = sum_i p_i^2/2 + phi_i q_i^2/2``."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        if phi.ndim != 1 or np.any(phi <= 0):
            raise ValueError("phi must be a vector of strictly positive entries")
        object.__setattr__(self, "phi", phi)

    @property
    def N(self) -> int:
        return self.phi.shape[0]

    def hamiltonian(self, z) -> float:
        z = _as_state(z)
        q, p = z[: self.N], z[self.N:]
        return float(0.5 * p @ p + 0.5 * (self.phi * q) @ q)

    def gradient(self, z) -> np.ndarray:
        z = _as_state(z)
        q, p = z[: self.N], z[self.N:]
        return np.concatenate([self.phi * q, p])

    def matrix(self) -> np.ndarray:
        """The linear field ``B`` with ``zdot = B z``."""
        N = self.N
        B = np.zeros((2 * N, 2 * N))
        B[:N, N:] = np.eye(N)
        B[N:, :N] = -np.diag(self.phi)
        return B

    def as_system(self) -> HamiltonianSystem:
        return HamiltonianSystem(self.N, self.hamiltonian, self.gradient)

    def __call__(self, t: float, z) -> np.ndarray:
        return self.matrix() @ _as_state(z)

    def exact_solution(self, z0, t) -> np.ndarray:
        """Closed-form flow; returns shape ``(2N, len(t))``."""
        z0 = _as_state(z0)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        w = np.sqrt(self.phi)[:, None]
        q0, p0 = z0[: self.N, None], z0[self.N:, None]
        c, s = np.cos(w * t), np.sin(w * t)
        q = q0 * c + p0 * s / w
        p = -q0 * w * s + p0 * c
        return np.vstack([q, p])


def assemble_wave_K(mu: float, n_tilde: int, delta_x: float, literal: bool = False) -> np.ndarray:
    """Stiffness matrix of the discretized wave Hamiltonian, size ``(n_tilde+2)^2``.

    The piecewise definition puts ``mu^2/dx`` on the diagonal for indices
    ``2..n_tilde-2``. Expanding the finite-difference sum gives the same value
    at ``n_tilde-1`` too, which is what we use by default; pass
    ``literal=True`` to leave that single entry at zero.
    """
    if n_tilde < 4:
        raise ValueError(f"n_tilde must be >= 4, got {n_tilde}")
    if delta_x <= 0:
        raise ValueError(f"delta_x must be positive, got {delta_x}")
    m = n_tilde + 2
    c = mu**2 / delta_x
    K = np.zeros((m, m))
    K[0, 0] = K[m - 1, m - 1] = c / 4
    K[1, 0] = K[n_tilde, n_tilde + 1] = -c / 2
    K[1, 1] = K[n_tilde, n_tilde] = 3 * c / 4
    last = n_tilde - 2 if literal else n_tilde - 1
    idx = np.arange(2, last + 1)
    K[idx, idx] = c
    inner = np.arange(1, n_tilde)
    K[inner, inner + 1] = -c / 2
    K[inner + 1, inner] = -c / 2
    return K


def wave_grid(n_tilde: int) -> np.ndarray:
    """``n_tilde + 2`` equispaced nodes on ``[-1/2, 1/2]`` including both endpoints."""
    return np.linspace(-0.5, 0.5, n_tilde + 2)


@dataclass(frozen=True)
class LinearWaveFOM:
    """Finite-difference discretization of the 1-d linear wave equation.

    The state is ``z = (q, p)`` with ``N = n_tilde + 2`` nodes each. The
    discrete Hamiltonian ``H_h = dx/2 p.p + q.K q`` drives the field through
    ``J_d = J / dx``, so the canonical Hamiltonian (the one whose plain ``J``
    gradient gives the field) is ``H_h / dx``; see :meth:`as_system`.
    """

    mu: float
    n_tilde: int
    literal_K: bool = False
    delta_x: float = field(init=False)
    K: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dx = 1.0 / (self.n_tilde + 1)
        object.__setattr__(self, "delta_x", dx)
        object.__setattr__(self, "K", assemble_wave_K(self.mu, self.n_tilde, dx, self.literal_K))

    @property
    def N(self) -> int:
        return self.n_tilde + 2

    @property
    def grid(self) -> np.ndarray:
        return wave_grid(self.n_tilde)

    def hamiltonian(self, z) -> float:
        return wave_hamiltonian(self, z)

    def canonical_hamiltonian(self, z) -> float:
        return wave_hamiltonian(self, z) / self.delta_x

    def canonical_gradient(self, z) -> np.ndarray:
        z = _as_state(z)
        N = self.N
        if z.shape[0] != 2 * N:
            raise DimensionError(f"state has length {z.shape[0]}, FOM expects {2 * N}")
        q, p = z[:N], z[N:]
        return np.concatenate([(self.K + self.K.T) @ q / self.delta_x, p], axis=0)

    def matrix(self) -> np.ndarray:
        """``B`` such that the FOM field is ``B z``."""
        N = self.N
        B = np.zeros((2 * N, 2 * N))
        B[:N, N:] = np.eye(N)
        B[N:, :N] = -(self.K + self.K.T) / self.delta_x
        return B

    def as_system(self) -> HamiltonianSystem:
        return HamiltonianSystem(self.N, self.canonical_hamiltonian, self.canonical_gradient, self.mu)

    def initial_condition(self) -> np.ndarray:
        return wave_initial_condition(self.mu, self.grid).to_array()

    def __call__(self, t: float, z) -> np.ndarray:
        return wave_vector_field(self, z)


def wave_hamiltonian(fom: LinearWaveFOM, z) -> float:
    """``H_h(z) = dx/2 p.p + q.K q``; the quadratic form acts on the q-block."""
    z = _as_state(z)
    N = fom.N
    if z.shape != (2 * N,):
        raise DimensionError(f"state has shape {z.shape}, FOM expects ({2 * N},)")
    q, p = z[:N], z[N:]
    return float(0.5 * fom.delta_x * p @ p + q @ fom.K @ q)


def wave_vector_field(fom: LinearWaveFOM, z) -> np.ndarray:
    """``J_d blockdiag(dx I, K + K^T) z`` with ``J_d = J / dx``."""
    z = _as_state(z)
    N = fom.N
    if z.shape[0] != 2 * N:
        raise DimensionError(f"state has length {z.shape[0]}, FOM expects {2 * N}")
    q, p = z[:N], z[N:]
    return np.concatenate([p, -(fom.K + fom.K.T) @ q / fom.delta_x], axis=0)


def spline_h(s):
    """Cubic B-spline-like bump: 1 at 0, support ``[0, 2]``, zero for ``s < 0``."""
    s = np.asarray(s, dtype=float)
    out = np.where(
        (s >= 0) & (s <= 1),
        1 - 1.5 * s**2 + 0.75 * s**3,
        np.where((s > 1) & (s <= 2), 0.25 * (2 - s) ** 3, 0.0),
    )
    return out if out.ndim else float(out)


def spline_h_derivative(s):
    s = np.asarray(s, dtype=float)
    out = np.where(
        (s >= 0) & (s <= 1),
        -3 * s + 2.25 * s**2,
        np.where((s > 1) & (s <= 2), -0.75 * (2 - s) ** 2, 0.0),
    )
    return out if out.ndim else float(out)


def wave_initial_condition(mu: float, grid) -> PhaseVector:
    """Right-travelling spline pulse centred at ``-mu/2``.

    ``q_i = h(20 mu |w_i + mu/2|)`` and ``p_i = -mu q0'(w_i)`` using the exact
    derivative; ``p`` is zero at the kink and both end nodes are clamped to zero.
    """
    grid = np.asarray(grid, dtype=float)
    if mu <= 0:
        raise ValueError("mu must be positive")
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least two nodes")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] < -0.5 - 1e-14 or grid[-1] > 0.5 + 1e-14:
        raise ValueError("grid must lie in [-1/2, 1/2]")
    shifted = grid + mu / 2
    s = 20 * mu * np.abs(shifted)
    q = spline_h(s)
    dq = spline_h_derivative(s) * 20 * mu * np.sign(shifted)
    p = -mu * dq
    q[0] = q[-1] = 0.0
    p[0] = p[-1] = 0.0
    return PhaseVector(q, p)


def symplecticity_residual(jacobian) -> float:
    """``||M^T J_{2N} M - J_{2n}||_F`` for a ``2N x 2n`` matrix ``M``."""
    M = np.asarray(jacobian, dtype=float)
    if M.ndim != 2:
        raise DimensionError("expected a matrix")
    _half(M.shape[0], "row dimension")
    _half(M.shape[1], "column dimension")
    R = M.T @ poisson_apply(M) - poisson_matrix(M.shape[1])
    return float(np.linalg.norm(R))
