"""Implicit midpoint time stepping, trajectories and snapshot matrices."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, LinearSolveError, SolverError

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "SnapshotMatrix",
    "LinearField",
    "implicit_midpoint_step",
    "integrate",
    "build_snapshot_matrix",
]

SOLVER_KINDS = ("direct-linear", "fixed-point", "newton")


@dataclass(frozen=True)
class IntegratorConfig:
    step_size: float = 0.01
    solver_tolerance: float = 1e-12
    max_iterations: int = 50
    solver_kind: str = "direct-linear"

    def __post_init__(self):
        if self.step_size == 0 or not np.isfinite(self.step_size):
            raise ValueError("step_size must be finite and nonzero")
        if self.solver_tolerance <= 0:
            raise ValueError("solver_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.solver_kind not in SOLVER_KINDS:
            raise ValueError(f"solver_kind must be one of {SOLVER_KINDS}")


class LinearField:
    """Autonomous linear vector field ``zdot = B z``.

    Wrapping the matrix lets the direct solver see ``B`` while still behaving
    like an ordinary ``field(t, z)`` callable.
    """

    def __init__(self, B):
        self.B = np.asarray(B, dtype=float)
        if self.B.ndim != 2 or self.B.shape[0] != self.B.shape[1]:
            raise DimensionError("B must be square")
        self._cache = {}

    def __call__(self, t, z):
        return self.B @ z

    def jacobian(self, t, z):
        return self.B

    def cayley_factor(self, h):
        """LU factorization of ``I - h/2 B`` and the matrix ``I + h/2 B``, cached per ``h``."""
        if h not in self._cache:
            n = self.B.shape[0]
            lhs = np.eye(n) - 0.5 * h * self.B
            try:
                with warnings.catch_warnings():
                    # singularity is reported below as a LinearSolveError
                    warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                    lu = scipy.linalg.lu_factor(lhs, check_finite=True)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise LinearSolveError(f"cannot factor I - h/2 B: {exc}") from exc
            if np.any(np.abs(np.diag(lu[0])) < np.finfo(float).eps * np.abs(lhs).max() * n):
                raise LinearSolveError("I - h/2 B is singular")
            self._cache[h] = (lu, np.eye(n) + 0.5 * h * self.B)
        return self._cache[h]


def _as_linear(field_) -> Optional[LinearField]:
    if isinstance(field_, LinearField):
        return field_
    if hasattr(field_, "matrix"):
        return LinearField(field_.matrix())
    return None


def _fd_jacobian(field_, eps=1e-6):
    """Central-difference Jacobian; only sensible for small (reduced) systems."""

    def jac(t, z):
        n = z.shape[0]
        J = np.empty((n, n))
        for i in range(n):
            dz = np.zeros(n)
            dz[i] = eps * max(1.0, abs(z[i]))
            J[:, i] = (field_(t, z + dz) - field_(t, z - dz)) / (2 * dz[i])
        return J

    return jac


def implicit_midpoint_step(field_: Callable, z, t: float, cfg: IntegratorConfig, jacobian: Callable = None):
    """One step of ``z+ = z + h f(t + h/2, (z + z+)/2)``.

    ``direct-linear`` requires a :class:`LinearField` (or an object exposing
    ``matrix()``) and solves the Cayley form exactly. ``fixed-point`` iterates
    the defining relation; ``newton`` uses ``jacobian(t, z)`` if given, else the
    field's own ``jacobian`` method, else central finite differences.
    """
    z = np.asarray(z, dtype=float)
    h = cfg.step_size
    kind = cfg.solver_kind
    lin = _as_linear(field_) if kind == "direct-linear" else None
    if kind == "direct-linear":
        if lin is None:
            raise TypeError("direct-linear solver needs a linear field")
        if lin.B.shape[0] != z.shape[0]:
            raise DimensionError(f"field has dimension {lin.B.shape[0]}, state has {z.shape[0]}")
        lu, rhs = lin.cayley_factor(h)
        return scipy.linalg.lu_solve(lu, rhs @ z)

    t_mid = t + 0.5 * h
    f0 = np.asarray(field_(t_mid, z), dtype=float)
    if f0.shape != z.shape:
        raise DimensionError(f"field returned shape {f0.shape} for state of shape {z.shape}")

    def defect(znew):
        return znew - z - h * field_(t_mid, 0.5 * (z + znew))

    scale = max(1.0, float(np.linalg.norm(z)))
    residual = np.inf
    if kind == "newton":
        jac = jacobian or getattr(field_, "jacobian", None) or _fd_jacobian(field_)
        eye = np.eye(z.shape[0])
        # start from z: the explicit predictor overshoots on stiff reduced fields
        z_new = z.copy()
    else:
        z_new = z + h * f0
    F = defect(z_new)
    for _ in range(cfg.max_iterations):
        residual = float(np.linalg.norm(F))
        if residual <= cfg.solver_tolerance * scale:
            return z_new
        if kind == "fixed-point":
            z_new = z_new - F
            F = defect(z_new)
            continue
        Jm = eye - 0.5 * h * np.asarray(jac(t_mid, 0.5 * (z + z_new)))
        try:
            delta = np.linalg.solve(Jm, F)
        except np.linalg.LinAlgError as exc:
            raise LinearSolveError(f"singular Newton matrix: {exc}", residual=residual) from exc
        # backtracking on the defect norm
        lam = 1.0
        while True:
            cand = z_new - lam * delta
            Fc = defect(cand)
            if np.linalg.norm(Fc) < residual or lam < 1e-4:
                break
            lam *= 0.5
        z_new, F = cand, Fc
    residual = float(np.linalg.norm(F))
    if residual <= cfg.solver_tolerance * scale:
        return z_new
    raise SolverError(
        f"implicit midpoint did not converge in {cfg.max_iterations} iterations (residual {residual:.3e})",
        residual=residual,
    )


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    parameter: float = float("nan")

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != self.times.shape[0]:
            raise DimensionError("states must have one column per time")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def __len__(self):
        return self.times.shape[0]


def integrate(field_, z0, t0: float, n_steps: int, cfg: IntegratorConfig, parameter=float("nan"), jacobian=None):
    """Run ``n_steps`` implicit midpoint steps from ``z0``; returns a :class:`Trajectory`."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    z0 = np.asarray(z0, dtype=float)
    if cfg.solver_kind == "direct-linear":
        lin = _as_linear(field_)
        if lin is None:
            raise TypeError("direct-linear solver needs a linear field")
        field_ = lin
    states = np.empty((z0.shape[0], n_steps + 1))
    states[:, 0] = z0
    h = cfg.step_size
    for k in range(n_steps):
        try:
            states[:, k + 1] = implicit_midpoint_step(field_, states[:, k], t0 + k * h, cfg, jacobian)
        except SolverError as exc:
            exc.step = k
            exc.args = (f"step {k}: {exc.args[0]}",)
            raise
    times = t0 + h * np.arange(n_steps + 1)
    if h < 0:
        times, states = times[::-1], states[:, ::-1]
    return Trajectory(times, states, parameter)


@dataclass
class SnapshotMatrix:
    """Columns are FOM states, trajectories stacked side by side in parameter order."""

    data: np.ndarray
    parameters: np.ndarray = field(default_factory=lambda: np.zeros(0))
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.parameters = np.atleast_1d(np.asarray(self.parameters, dtype=float))
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if self.data.ndim != 2:
            raise DimensionError("snapshot data must be a matrix")
        if self.parameters.size and self.times.size:
            if self.data.shape[1] != self.parameters.size * self.times.size:
                raise DimensionError(
                    f"{self.data.shape[1]} columns but {self.parameters.size} parameters x {self.times.size} times"
                )

    @property
    def shape(self):
        return self.data.shape

    def trajectory(self, i: int) -> Trajectory:
        T = self.times.size
        return Trajectory(self.times, self.data[:, i * T:(i + 1) * T], self.parameters[i])


def build_snapshot_matrix(trajectories: Sequence[Trajectory]) -> SnapshotMatrix:
    if not trajectories:
        raise ValueError("need at least one trajectory")
    dim = trajectories[0].dim
    times = trajectories[0].times
    for tr in trajectories[1:]:
        if tr.dim != dim:
            raise DimensionError(f"state dimension {tr.dim} differs from {dim}")
        if tr.times.shape != times.shape or not np.allclose(tr.times, times):
            raise DimensionError("trajectories must share the same time grid")
    data = np.hstack([tr.states for tr in trajectories])
    return SnapshotMatrix(data, [tr.parameter for tr in trajectories], times)
