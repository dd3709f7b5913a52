"""POD and PSD (cotangent lift) reduced bases and the vector fields they induce.

The functional API follows the snapshot convention (one state per column).
:class:`POD` and :class:`PSD` wrap it as scikit-learn transformers, where
samples are rows as usual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionError, RankDeficiencyError
from .hamiltonian import HamiltonianSystem, poisson_apply, symplecticity_residual
from .integrators import SnapshotMatrix
from .validation import check_even_features, check_states

__all__ = [
    "PODBasis",
    "PSDBasis",
    "pod",
    "psd_cotangent_lift",
    "cotangent_lift",
    "symplectic_inverse",
    "pod_reduced_field",
    "psd_reduced_field",
    "psd_reduced_field_hamiltonian",
    "fix_column_signs",
    "POD",
    "PSD",
]


def fix_column_signs(U: np.ndarray) -> np.ndarray:
    """Flip columns so that each one's largest-magnitude entry is positive."""
    U = np.array(U, dtype=float, copy=True)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def _data(M) -> np.ndarray:
    if isinstance(M, SnapshotMatrix):
        return M.data
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError("snapshot matrix must be 2-d")
    return M


def _leading_left_singular(M: np.ndarray, k: int) -> np.ndarray:
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    tol = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if rank < k:
        raise RankDeficiencyError(f"snapshot matrix has numerical rank {rank} < {k}")
    return fix_column_signs(U[:, :k])


@dataclass(frozen=True)
class PODBasis:
    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if np.linalg.norm(A.T @ A - np.eye(A.shape[1])) > 1e-10:
            raise ValueError("POD basis columns are not orthonormal")
        object.__setattr__(self, "A", A)


@dataclass(frozen=True)
class PSDBasis:
    Phi: np.ndarray

    def __post_init__(self):
        Phi = np.asarray(self.Phi, dtype=float)
        if np.linalg.norm(Phi.T @ Phi - np.eye(Phi.shape[1])) > 1e-10:
            raise ValueError("PSD basis Phi does not have orthonormal columns")
        object.__setattr__(self, "Phi", Phi)

    @property
    def A(self) -> np.ndarray:
        return cotangent_lift(self.Phi)

    @property
    def A_plus(self) -> np.ndarray:
        return symplectic_inverse(self.A)


def pod(M, n: int) -> PODBasis:
    """First ``2n`` left singular vectors of the snapshot matrix."""
    data = _data(M)
    if n < 1 or 2 * n > min(data.shape):
        raise DimensionError(f"cannot extract 2n={2 * n} modes from a {data.shape} matrix")
    return PODBasis(_leading_left_singular(data, 2 * n))


def cotangent_lift(Phi) -> np.ndarray:
    """``blockdiag(Phi, Phi)``."""
    Phi = np.asarray(Phi, dtype=float)
    N, n = Phi.shape
    A = np.zeros((2 * N, 2 * n))
    A[:N, :n] = Phi
    A[N:, n:] = Phi
    return A


def psd_cotangent_lift(M, n: int) -> PSDBasis:
    """Cotangent-lift PSD: ``Phi`` from the SVD of ``[M_q  M_p]``."""
    data = _data(M)
    N = data.shape[0] // 2
    if data.shape[0] % 2:
        raise DimensionError("snapshot rows must be even (q and p blocks)")
    if n < 1 or n > N:
        raise DimensionError(f"need 1 <= n <= N={N}, got n={n}")
    stacked = np.hstack([data[:N], data[N:]])
    return PSDBasis(_leading_left_singular(stacked, n))


def symplectic_inverse(A) -> np.ndarray:
    """``A^+ = J_{2n} A^T J_{2N}^T``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] % 2 or A.shape[1] % 2:
        raise DimensionError(f"symplectic inverse needs even dimensions, got {A.shape}")
    # A^T J^T = (J A)^T
    return poisson_apply(poisson_apply(A).T)


def _check_field_dims(A, n_red, z):
    z = np.asarray(z, dtype=float)
    if z.shape[0] != n_red:
        raise DimensionError(f"reduced state has length {z.shape[0]}, basis expects {n_red}")
    return z


def pod_reduced_field(basis, fom_field):
    """``z -> A^T f(t, A z)``."""
    A = basis.A if hasattr(basis, "A") else np.asarray(basis, dtype=float)

    def field(t, z):
        z = _check_field_dims(A, A.shape[1], z)
        return A.T @ fom_field(t, A @ z)

    return field


def psd_reduced_field(basis, fom_field):
    """``z -> A^+ f(t, A z)``."""
    A = basis.A if hasattr(basis, "A") else np.asarray(basis, dtype=float)
    A_plus = symplectic_inverse(A)

    def field(t, z):
        z = _check_field_dims(A, A.shape[1], z)
        return A_plus @ fom_field(t, A @ z)

    return field


def psd_reduced_field_hamiltonian(basis, system: HamiltonianSystem):
    """Hamiltonian form ``z -> J_{2n} A^T grad H(A z)``."""
    A = basis.A if hasattr(basis, "A") else np.asarray(basis, dtype=float)

    def field(t, z):
        z = _check_field_dims(A, A.shape[1], z)
        return poisson_apply(A.T @ system.gradient(A @ z))

    return field


class _LinearReducer(TransformerMixin, BaseEstimator):
    """Shared transform/inverse_transform for linear bases; rows are states."""

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_states(X, n_features=self.n_features_in_)
        return X @ self._reduction_matrix().T

    def inverse_transform(self, Z):
        check_is_fitted(self, "basis_")
        Z = check_states(Z, n_features=self.components_.shape[1])
        return Z @ self.components_.T

    def reduced_vector_field(self, fom_field):
        check_is_fitted(self, "basis_")
        return self._field_factory(self.basis_, fom_field)

    def projection_error(self, X) -> float:
        """Relative Frobenius reconstruction error over the rows of ``X``."""
        X = check_states(X, n_features=self.n_features_in_)
        R = X - self.inverse_transform(self.transform(X))
        return float(np.linalg.norm(R) / np.linalg.norm(X))


class POD(_LinearReducer):
    """Proper orthogonal decomposition with ``2 * n_modes`` orthonormal modes.

    Parameters
    ----------
    n_modes : int
        Half the reduced dimension.

    Attributes
    ----------
    basis_ : PODBasis
    components_ : ndarray of shape (2N, 2n)
    singular_values_ : ndarray
    """

    _field_factory = staticmethod(pod_reduced_field)

    def __init__(self, n_modes=1):
        self.n_modes = n_modes

    def fit(self, X, y=None):
        X = check_states(X)
        self.n_features_in_ = X.shape[1]
        self.basis_ = pod(X.T, self.n_modes)
        self.components_ = self.basis_.A
        self.singular_values_ = np.linalg.svd(X, compute_uv=False)
        return self

    def _reduction_matrix(self):
        return self.components_.T


class PSD(_LinearReducer):
    """Proper symplectic decomposition via the cotangent lift.

    ``transform`` applies the symplectic inverse ``A^+`` (equal to ``A^T`` for
    a cotangent lift) and ``inverse_transform`` applies ``A``.

    Attributes
    ----------
    basis_ : PSDBasis
    Phi_ : ndarray of shape (N, n)
    components_ : ndarray of shape (2N, 2n)
    """

    _field_factory = staticmethod(psd_reduced_field)

    def __init__(self, n_modes=1):
        self.n_modes = n_modes

    def fit(self, X, y=None):
        X = check_even_features(check_states(X))
        self.n_features_in_ = X.shape[1]
        self.basis_ = psd_cotangent_lift(X.T, self.n_modes)
        self.Phi_ = self.basis_.Phi
        self.components_ = self.basis_.A
        self.symplecticity_residual_ = symplecticity_residual(self.components_)
        return self

    def _reduction_matrix(self):
        return symplectic_inverse(self.components_)
