import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import fd_gradient, rel_err
from sympae.exceptions import DimensionError
from sympae.hamiltonian import (
    HamiltonianSystem,
    LinearWaveFOM,
    OscillatorFOM,
    PhaseVector,
    assemble_wave_K,
    hamiltonian_vector_field,
    poisson_apply,
    poisson_matrix,
    spline_h,
    spline_h_derivative,
    symplecticity_residual,
    wave_grid,
    wave_hamiltonian,
    wave_initial_condition,
    wave_vector_field,
)
from sympae.linear import cotangent_lift
from sympae.manifolds import random_stiefel


def wave_energy_sum(fom, z):
    """Direct finite-difference sum for the discrete wave energy."""
    N, dx, mu = fom.N, fom.delta_x, fom.mu
    q, p = z[:N], z[N:]
    d = np.diff(q)
    pot = mu**2 / (4 * dx) * (d[0] ** 2 + d[-1] ** 2 + 2 * np.sum(d[1:-1] ** 2))
    return 0.5 * dx * np.sum(p * p) + pot


class TestPhaseVector:
    def test_round_trip(self):
        z = np.arange(6.0)
        pv = PhaseVector.from_array(z)
        np.testing.assert_array_equal(pv.q, [0, 1, 2])
        np.testing.assert_array_equal(pv.p, [3, 4, 5])
        np.testing.assert_array_equal(pv.to_array(), z)
        assert pv.N == 3

    def test_unequal_blocks_rejected(self):
        with pytest.raises(DimensionError):
            PhaseVector(np.zeros(2), np.zeros(3))

    def test_odd_array_rejected(self):
        with pytest.raises(DimensionError):
            PhaseVector.from_array(np.zeros(5))


class TestPoisson:
    def test_block_structure(self):
        np.testing.assert_array_equal(poisson_apply(np.array([1.0, 0, 0, 0])), [0, 0, -1, 0])

    def test_one_dimensional(self):
        np.testing.assert_array_equal(poisson_apply(np.array([0.0, 1.0])), [1.0, 0.0])

    @given(st.integers(1, 8).flatmap(lambda n: arrays(np.float64, 2 * n, elements=st.floats(-1e6, 1e6))))
    @settings(max_examples=50, deadline=None)
    def test_twice_is_negation(self, z):
        np.testing.assert_array_equal(poisson_apply(poisson_apply(z)), -z)

    def test_matches_dense_matrix(self, rng):
        z = rng.normal(size=10)
        np.testing.assert_array_equal(poisson_apply(z), poisson_matrix(10) @ z)

    def test_column_stack(self, rng):
        Z = rng.normal(size=(6, 4))
        np.testing.assert_allclose(poisson_apply(Z), poisson_matrix(6) @ Z)

    def test_odd_length(self):
        with pytest.raises(DimensionError):
            poisson_apply(np.zeros(3))


class TestVectorField:
    def test_harmonic_oscillator(self):
        sys = HamiltonianSystem(1, lambda z: 0.5 * z @ z, lambda z: z)
        np.testing.assert_array_equal(hamiltonian_vector_field(sys, np.array([1.0, 0.0])), [0.0, -1.0])

    def test_two_oscillators(self, rng):
        fom = OscillatorFOM([0.05, np.pi])
        z = rng.normal(size=4)
        q1, q2, p1, p2 = z
        expected = [p1, p2, -0.05 * q1, -np.pi * q2]
        np.testing.assert_allclose(hamiltonian_vector_field(fom.as_system(), z), expected, rtol=0, atol=1e-15)
        np.testing.assert_allclose(fom(0.0, z), expected, rtol=0, atol=1e-15)

    def test_critical_point(self):
        sys = HamiltonianSystem(2, lambda z: 0.0, lambda z: np.zeros(4))
        np.testing.assert_array_equal(hamiltonian_vector_field(sys, np.ones(4)), np.zeros(4))

    def test_dimension_mismatch(self):
        fom = OscillatorFOM([1.0, 2.0])
        with pytest.raises(DimensionError):
            hamiltonian_vector_field(fom.as_system(), np.zeros(6))

    def test_oscillator_gradient_fd(self, rng):
        fom = OscillatorFOM([0.3, 1.7, 2.0])
        z = rng.normal(size=6)
        assert rel_err(fom.gradient(z), fd_gradient(fom.hamiltonian, z)) < 1e-6

    def test_oscillator_nonpositive_phi(self):
        with pytest.raises(ValueError):
            OscillatorFOM([1.0, 0.0])

    def test_oscillator_exact_solution_matches_field(self, rng):
        fom = OscillatorFOM([0.05, np.pi])
        z0 = rng.normal(size=4)
        t = np.array([0.0, 1e-6])
        Z = fom.exact_solution(z0, t)
        np.testing.assert_allclose(Z[:, 0], z0)
        np.testing.assert_allclose((Z[:, 1] - Z[:, 0]) / 1e-6, fom(0.0, z0), rtol=1e-5, atol=1e-6)


class TestWaveK:
    def test_small_case_entries(self):
        K = assemble_wave_K(1.0, 4, 1.0)
        assert K.shape == (6, 6)
        assert K[0, 0] == 0.25
        assert K[1, 0] == -0.5
        assert K[2, 2] == 1.0

    def test_piecewise_entries(self):
        mu, nt, dx = 0.6, 9, 0.1
        c = mu**2 / dx
        K = assemble_wave_K(mu, nt, dx, literal=True)
        m = nt + 2
        expected = np.zeros((m, m))
        for i in range(m):
            for j in range(m):
                if i == j and i in (0, nt + 1):
                    expected[i, j] = c / 4
                elif (i, j) in ((1, 0), (nt, nt + 1)):
                    expected[i, j] = -c / 2
                elif i == j and i in (1, nt):
                    expected[i, j] = 3 * c / 4
                elif i == j and 2 <= i <= nt - 2:
                    expected[i, j] = c
                elif abs(i - j) == 1 and i not in (0, nt + 1) and j not in (0, nt + 1):
                    expected[i, j] = -c / 2
        np.testing.assert_array_equal(K, expected)

    def test_default_fills_last_interior_diagonal(self):
        lit = assemble_wave_K(0.5, 8, 0.1, literal=True)
        full = assemble_wave_K(0.5, 8, 0.1)
        diff = full - lit
        assert diff[7, 7] == pytest.approx(0.25 / 0.1)
        diff[7, 7] = 0
        assert not diff.any()

    def test_zero_mu(self):
        assert not assemble_wave_K(0.0, 6, 0.1).any()

    def test_mu_scaling(self):
        np.testing.assert_allclose(assemble_wave_K(1.0, 6, 0.1), 4 * assemble_wave_K(0.5, 6, 0.1), rtol=1e-15)

    @pytest.mark.parametrize("nt,dx", [(3, 0.1), (4, 0.0), (4, -1.0)])
    def test_invalid(self, nt, dx):
        with pytest.raises(ValueError):
            assemble_wave_K(0.5, nt, dx)

    def test_literal_reading_is_indefinite(self):
        K = assemble_wave_K(0.5, 16, 1 / 17, literal=True)
        assert np.linalg.eigvalsh(K + K.T).min() < -1e-8
        K = assemble_wave_K(0.5, 16, 1 / 17)
        assert np.linalg.eigvalsh(K + K.T).min() > -1e-12


class TestWaveFOM:
    def test_dimensions(self):
        fom = LinearWaveFOM(0.5, 32)
        assert fom.N == 34
        assert fom.delta_x == pytest.approx(1 / 33)
        assert fom.grid[0] == -0.5 and fom.grid[-1] == 0.5
        assert wave_grid(32).size == 34

    def test_hamiltonian_zero(self):
        fom = LinearWaveFOM(0.5, 8)
        assert wave_hamiltonian(fom, np.zeros(20)) == 0.0

    def test_kinetic_only(self):
        fom = LinearWaveFOM(0.5, 4)
        z = np.concatenate([np.zeros(6), np.ones(6)])
        assert wave_hamiltonian(fom, z) == pytest.approx(0.6, rel=1e-15)

    def test_hamiltonian_matches_summation(self, rng):
        for nt in (4, 7, 32):
            fom = LinearWaveFOM(rng.uniform(5 / 12, 2 / 3), nt)
            z = rng.normal(size=2 * fom.N)
            assert wave_hamiltonian(fom, z) == pytest.approx(wave_energy_sum(fom, z), rel=1e-12)

    def test_field_zero(self):
        fom = LinearWaveFOM(0.5, 8)
        np.testing.assert_array_equal(wave_vector_field(fom, np.zeros(20)), np.zeros(20))

    def test_qdot_is_p(self, rng):
        fom = LinearWaveFOM(0.55, 10)
        z = rng.normal(size=24)
        np.testing.assert_array_equal(wave_vector_field(fom, z)[:12], z[12:])

    def test_field_from_fd_hamiltonian(self, rng):
        fom = LinearWaveFOM(0.47, 12)
        z = rng.normal(size=2 * fom.N)
        grad = fd_gradient(fom.canonical_hamiltonian, z, eps=1e-5)
        assert rel_err(wave_vector_field(fom, z), poisson_apply(grad)) < 1e-6
        assert rel_err(fom.as_system().vector_field(0.0, z), wave_vector_field(fom, z)) < 1e-14

    def test_matrix_consistent(self, rng):
        fom = LinearWaveFOM(0.6, 6)
        z = rng.normal(size=16)
        np.testing.assert_allclose(fom.matrix() @ z, fom(0.0, z), rtol=1e-14, atol=1e-12)

    def test_dimension_mismatch(self):
        fom = LinearWaveFOM(0.5, 6)
        with pytest.raises(DimensionError):
            wave_hamiltonian(fom, np.zeros(10))
        with pytest.raises(DimensionError):
            wave_vector_field(fom, np.zeros(10))


class TestSpline:
    def test_values(self):
        assert spline_h(0.0) == 1.0
        assert spline_h(1.0) == 0.25
        for s in (2.0, 2.5, -0.1):
            assert spline_h(s) == 0.0

    def test_c1_at_branch_points(self):
        eps = 1e-7
        for s, slope in ((1.0, -0.75), (2.0, 0.0)):
            left = (spline_h(s) - spline_h(s - eps)) / eps
            right = (spline_h(s + eps) - spline_h(s)) / eps
            assert left == pytest.approx(slope, abs=1e-6)
            assert right == pytest.approx(slope, abs=1e-6)

    @given(st.floats(1e-3, 3.0) | st.floats(-1.0, -1e-3))
    @settings(max_examples=100, deadline=None)
    def test_derivative_fd(self, s):
        eps = 1e-6
        fd = (spline_h(s + eps) - spline_h(s - eps)) / (2 * eps)
        assert spline_h_derivative(s) == pytest.approx(fd, abs=1e-5)


class TestInitialCondition:
    def test_peak_and_boundary(self):
        mu = 0.5
        grid = np.array([-0.5, -0.3, -mu / 2, 0.0, 0.5])
        ic = wave_initial_condition(mu, grid)
        assert ic.q[2] == 1.0
        assert ic.p[2] == 0.0
        assert ic.q[-1] == 0.0 and ic.p[-1] == 0.0
        assert ic.q[0] == 0.0 and ic.p[0] == 0.0

    def test_p_matches_fd_of_q(self):
        mu = 0.5
        grid = wave_grid(400)
        dx = grid[1] - grid[0]
        ic = wave_initial_condition(mu, grid)
        q0 = lambda w: spline_h(20 * mu * np.abs(w + mu / 2))
        interior = np.abs(grid + mu / 2) > 3 * dx
        fd = (q0(grid + dx) - q0(grid - dx)) / (2 * dx)
        err = np.max(np.abs(ic.p[interior][1:-1] + mu * fd[interior][1:-1]))
        assert err < 20 * (20 * mu) ** 3 * dx**2

    @pytest.mark.parametrize("grid", [np.array([0.1, 0.0]), np.array([-0.6, 0.0, 0.5])])
    def test_bad_grid(self, grid):
        with pytest.raises(ValueError):
            wave_initial_condition(0.5, grid)

    def test_bad_mu(self):
        with pytest.raises(ValueError):
            wave_initial_condition(0.0, wave_grid(8))


class TestSymplecticityResidual:
    def test_identity(self):
        assert symplecticity_residual(np.eye(6)) == 0.0

    def test_cotangent_lift(self, rng):
        A = cotangent_lift(random_stiefel(9, 3, rng))
        assert symplecticity_residual(A) < 1e-12

    def test_scaled_identity(self):
        assert symplecticity_residual(2 * np.eye(2)) == pytest.approx(3 * np.sqrt(2))

    def test_odd_dimensions(self):
        with pytest.raises(DimensionError):
            symplecticity_residual(np.eye(3))
