import numpy as np
import pytest
from sklearn.base import clone
from sklearn.utils.estimator_checks import check_get_params_invariance, check_set_params

from sympae.exceptions import DimensionError, RankDeficiencyError
from sympae.hamiltonian import LinearWaveFOM, OscillatorFOM, poisson_matrix, symplecticity_residual
from sympae.integrators import IntegratorConfig, integrate
from sympae.linear import (
    POD,
    PSD,
    PODBasis,
    PSDBasis,
    cotangent_lift,
    fix_column_signs,
    pod,
    pod_reduced_field,
    psd_cotangent_lift,
    psd_reduced_field,
    psd_reduced_field_hamiltonian,
    symplectic_inverse,
)
from sympae.manifolds import random_stiefel


@pytest.fixture(scope="module")
def torus_snapshots():
    fom = OscillatorFOM([0.05, np.pi])
    return integrate(fom, np.array([0.0, 0, 1, 3]), 0.0, 20000, IntegratorConfig(0.05)).states


def random_symplectic(n2, rng):
    """Product of random linear shears: a dense element of Sp(2N)."""
    N = n2 // 2
    M = np.eye(n2)
    for k in range(4):
        S = rng.normal(scale=0.5, size=(N, N))
        S = S + S.T
        L = np.eye(n2)
        if k % 2:
            L[:N, N:] = S
        else:
            L[N:, :N] = S
        M = L @ M
    return M


class TestPOD:
    def test_diagonal(self):
        A = pod(np.diag([3.0, 2, 1, 0.5]), 1).A
        np.testing.assert_allclose(np.abs(A), np.eye(4)[:, :2])

    def test_sign_convention(self, rng):
        A = pod(rng.normal(size=(6, 20)), 2).A
        idx = np.argmax(np.abs(A), axis=0)
        assert np.all(A[idx, np.arange(4)] > 0)

    def test_beats_random_candidates(self, rng):
        M = rng.normal(size=(6, 40))
        A = pod(M, 1).A
        best = np.linalg.norm(M - A @ A.T @ M, 2)
        for _ in range(200):
            Q = random_stiefel(6, 2, rng)
            assert best <= np.linalg.norm(M - Q @ Q.T @ M, 2) + 1e-12

    def test_torus_alignment(self, torus_snapshots):
        A = pod(torus_snapshots, 1).A
        assert abs(A[:, 0] @ np.eye(4)[:, 0]) > 0.99 or abs(A[:, 1] @ np.eye(4)[:, 0]) > 0.99
        assert max(abs(A[3, 0]), abs(A[3, 1])) > 0.99

    def test_rank_deficient(self):
        M = np.outer(np.arange(1.0, 5.0), np.ones(10))
        with pytest.raises(RankDeficiencyError):
            pod(M, 1)

    def test_too_many_modes(self, rng):
        with pytest.raises(DimensionError):
            pod(rng.normal(size=(4, 10)), 3)

    def test_basis_validation(self):
        with pytest.raises(ValueError):
            PODBasis(np.ones((4, 2)))


class TestPSD:
    def test_torus_alignment(self, torus_snapshots):
        b = psd_cotangent_lift(torus_snapshots, 1)
        assert abs(b.Phi[0, 0]) > 0.99

    def test_pure_q_diagonal(self):
        M = np.zeros((6, 3))
        M[:3] = np.diag([3.0, 2.0, 1.0])
        np.testing.assert_allclose(psd_cotangent_lift(M, 2).Phi, np.eye(3)[:, :2])

    def test_invariants(self, rng):
        b = psd_cotangent_lift(rng.normal(size=(10, 30)), 3)
        assert np.linalg.norm(b.Phi.T @ b.Phi - np.eye(3)) < 1e-10
        assert symplecticity_residual(b.A) < 1e-10
        assert np.linalg.norm(b.A.T @ b.A - np.eye(6)) < 1e-10

    def test_minimizes_over_cotangent_lifts(self, rng):
        M = rng.normal(size=(8, 25))
        A = psd_cotangent_lift(M, 2).A
        best = np.linalg.norm(M - A @ A.T @ M)
        for _ in range(100):
            B = cotangent_lift(random_stiefel(4, 2, rng))
            assert best <= np.linalg.norm(M - B @ B.T @ M) + 1e-12

    def test_errors(self, rng):
        with pytest.raises(DimensionError):
            psd_cotangent_lift(rng.normal(size=(5, 10)), 1)
        with pytest.raises(DimensionError):
            psd_cotangent_lift(rng.normal(size=(6, 10)), 4)
        with pytest.raises(ValueError):
            PSDBasis(np.ones((3, 2)))


class TestSymplecticInverse:
    def test_cotangent_lift_is_transpose(self, rng):
        A = cotangent_lift(random_stiefel(7, 3, rng))
        np.testing.assert_allclose(symplectic_inverse(A), A.T, atol=1e-15)

    def test_left_inverse_on_sp(self, rng):
        A = random_symplectic(8, rng) @ cotangent_lift(random_stiefel(4, 2, rng))
        assert symplecticity_residual(A) < 1e-10
        np.testing.assert_allclose(symplectic_inverse(A) @ A, np.eye(4), atol=1e-10)

    def test_identity(self):
        np.testing.assert_array_equal(symplectic_inverse(np.eye(6)), np.eye(6))

    def test_matches_formula(self, rng):
        A = rng.normal(size=(6, 4))
        np.testing.assert_allclose(symplectic_inverse(A), poisson_matrix(4) @ A.T @ poisson_matrix(6).T)

    def test_odd(self):
        with pytest.raises(DimensionError):
            symplectic_inverse(np.ones((5, 2)))


class TestReducedFields:
    def test_torus_pod_zero(self, rng):
        A = np.zeros((4, 2))
        A[0, 0] = A[3, 1] = 1
        f = pod_reduced_field(A, OscillatorFOM([0.05, np.pi]))
        for _ in range(20):
            assert not f(0.0, rng.normal(size=2)).any()

    def test_torus_psd_oscillator(self, rng):
        A = np.zeros((4, 2))
        A[0, 0] = A[2, 1] = 1
        f = psd_reduced_field(A, OscillatorFOM([0.05, np.pi]))
        z = rng.normal(size=2)
        np.testing.assert_allclose(f(0.0, z), [z[1], -0.05 * z[0]], atol=1e-15)

    def test_identity_basis(self, rng):
        fom = OscillatorFOM([1.0, 2.0])
        z = rng.normal(size=4)
        np.testing.assert_array_equal(pod_reduced_field(np.eye(4), fom)(0.0, z), fom(0.0, z))

    def test_linear_reduced_matrix(self, rng):
        B = rng.normal(size=(6, 6))
        A = pod(rng.normal(size=(6, 20)), 1).A
        z = rng.normal(size=2)
        np.testing.assert_allclose(pod_reduced_field(A, lambda t, x: B @ x)(0.0, z), A.T @ B @ A @ z)

    def test_two_psd_forms_agree(self, rng):
        fom = LinearWaveFOM(0.5, 10)
        basis = psd_cotangent_lift(rng.normal(size=(24, 40)), 3)
        f1 = psd_reduced_field(basis, fom)
        f2 = psd_reduced_field_hamiltonian(basis, fom.as_system())
        for _ in range(5):
            z = rng.normal(size=6)
            np.testing.assert_allclose(f1(0.0, z), f2(0.0, z), rtol=1e-12, atol=1e-12 * np.linalg.norm(f1(0.0, z)))

    def test_zero_field(self, rng):
        basis = psd_cotangent_lift(rng.normal(size=(8, 20)), 2)
        assert not psd_reduced_field(basis, lambda t, x: np.zeros_like(x))(0.0, rng.normal(size=4)).any()

    def test_dimension_mismatch(self, rng):
        basis = psd_cotangent_lift(rng.normal(size=(8, 20)), 2)
        with pytest.raises(DimensionError):
            psd_reduced_field(basis, lambda t, x: x)(0.0, np.ones(3))

    def test_psd_rom_conserves_energy(self):
        fom = LinearWaveFOM(0.5, 16)
        tr = integrate(fom, fom.initial_condition(), 0.0, 100, IntegratorConfig(0.01))
        basis = psd_cotangent_lift(tr.states, 3)
        A = basis.A
        Br = symplectic_inverse(A) @ fom.matrix() @ A
        from sympae.integrators import LinearField

        rom = integrate(LinearField(Br), A.T @ tr.states[:, 0], 0.0, 1000, IntegratorConfig(0.01))
        H = np.array([fom.hamiltonian(A @ x) for x in rom.states.T])
        assert np.max(np.abs(H - H[0])) / abs(H[0]) < 1e-10


class TestEstimators:
    @pytest.mark.parametrize("cls", [POD, PSD])
    def test_sklearn_params(self, cls):
        est = cls(n_modes=2)
        check_get_params_invariance(cls.__name__, est)
        check_set_params(cls.__name__, est)
        assert clone(est).get_params() == {"n_modes": 2}

    def test_psd_transform_roundtrip(self, rng):
        X = rng.normal(size=(30, 10))
        psd = PSD(2).fit(X)
        Z = psd.transform(X)
        assert Z.shape == (30, 4)
        np.testing.assert_allclose(psd.inverse_transform(Z), X @ psd.components_ @ psd.components_.T)
        assert psd.symplecticity_residual_ < 1e-12
        np.testing.assert_allclose(psd.transform(psd.inverse_transform(Z)), Z, atol=1e-12)

    def test_pod_projection_error(self, rng):
        X = rng.normal(size=(30, 6))
        pod_ = POD(3).fit(X)
        assert pod_.projection_error(X) < 1e-12

    def test_not_fitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            PSD(1).transform(np.ones((2, 4)))

    def test_feature_mismatch(self, rng):
        psd = PSD(1).fit(rng.normal(size=(10, 6)))
        with pytest.raises(DimensionError):
            psd.transform(np.ones((2, 8)))

    def test_odd_features(self, rng):
        with pytest.raises(DimensionError):
            PSD(1).fit(rng.normal(size=(10, 5)))

    def test_estimator_field_matches_function(self, rng):
        fom = OscillatorFOM([1.0, 2.0, 3.0])
        X = rng.normal(size=(40, 6))
        psd = PSD(1).fit(X)
        z = rng.normal(size=2)
        np.testing.assert_allclose(psd.reduced_vector_field(fom)(0.0, z), psd_reduced_field(psd.basis_, fom)(0.0, z))


def test_fix_column_signs():
    U = np.array([[1.0, -3.0], [-2.0, 1.0]])
    np.testing.assert_array_equal(fix_column_signs(U), [[-1.0, 3.0], [2.0, -1.0]])
