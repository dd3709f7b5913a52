import numpy as np
import pytest

from conftest import fd_gradient, fd_jacobian, rel_err
from sympae.exceptions import DimensionError
from sympae.hamiltonian import symplecticity_residual
from sympae.sympnet import (
    SIGMOID,
    TANH,
    ActivationSympLayer,
    GradientP,
    GradientQ,
    GradientSympLayer,
    LinearSympLayer,
    SympNetBlock,
    get_activation,
)


def random_layers(N, rng, activation="tanh"):
    S = rng.normal(size=(N, N))
    return [
        LinearSympLayer(S, "q"),
        LinearSympLayer(S.T, "p"),
        ActivationSympLayer(rng.normal(size=N), activation, "q"),
        ActivationSympLayer(rng.normal(size=N), activation, "p"),
        GradientSympLayer(rng.normal(size=(2 * N + 1, N)), rng.normal(size=2 * N + 1), rng.normal(size=2 * N + 1), activation, "q"),
        GradientSympLayer(rng.normal(size=(N + 1, N)), rng.normal(size=N + 1), rng.normal(size=N + 1), activation, "p"),
    ]


class TestActivation:
    @pytest.mark.parametrize("act", [TANH, SIGMOID])
    def test_derivative(self, act, rng):
        x = rng.normal(size=7)
        np.testing.assert_allclose(act.derivative(x), fd_jacobian(act, x).diagonal(), rtol=1e-7)

    def test_sigmoid_values(self):
        assert SIGMOID(0.0) == 0.5
        np.testing.assert_allclose(SIGMOID(np.array([2.0])), 1 / (1 + np.exp(-2.0)))

    def test_lookup(self):
        assert get_activation("tanh") == TANH
        with pytest.raises(ValueError):
            get_activation("relu")


class TestForwardExamples:
    def test_linear_identity_S(self):
        np.testing.assert_allclose(LinearSympLayer(np.eye(1), "q")(np.array([1.0, 2.0])), [3.0, 2.0])

    def test_gradient_p_tanh(self):
        out = GradientP(np.ones((1, 1)), [2.0], [0.0])(np.array([0.5, 0.0]))
        np.testing.assert_allclose(out, [0.5, 2 * np.tanh(0.5)])

    def test_zero_amplitude_is_identity(self, rng):
        z = rng.normal(size=6)
        layer = GradientQ(rng.normal(size=(5, 3)), np.zeros(5), rng.normal(size=5))
        np.testing.assert_array_equal(layer(z), z)

    def test_activation_layer(self):
        out = ActivationSympLayer([1.0, -1.0], "tanh", "q")(np.array([0.0, 0.0, 1.0, 2.0]))
        np.testing.assert_allclose(out, [np.tanh(1.0), -np.tanh(2.0), 1.0, 2.0])

    def test_S_is_symmetrized(self):
        layer = LinearSympLayer([[0.0, 2.0], [0.0, 0.0]])
        np.testing.assert_array_equal(layer.S, [[0.0, 1.0], [1.0, 0.0]])

    def test_batch_matches_rows(self, rng):
        layer = random_layers(3, rng)[4]
        Z = rng.normal(size=(5, 6))
        out = layer(Z)
        for i in range(5):
            np.testing.assert_allclose(out[i], layer(Z[i]))

    def test_bad_shapes(self, rng):
        with pytest.raises(DimensionError):
            LinearSympLayer(np.eye(2))(np.ones(5))
        with pytest.raises(DimensionError):
            GradientSympLayer(np.ones((3, 2)), np.ones(2), np.ones(3))
        with pytest.raises(ValueError):
            LinearSympLayer(np.eye(2), mode="x")


class TestJacobian:
    @pytest.mark.parametrize("activation", ["tanh", "sigmoid"])
    def test_matches_fd(self, rng, activation):
        z = rng.normal(size=8)
        for layer in random_layers(4, rng, activation):
            assert rel_err(layer.jacobian(z), fd_jacobian(layer.forward, z)) < 1e-7

    @pytest.mark.parametrize("N", [1, 2, 5, 17])
    def test_symplectic(self, N, rng):
        for layer in random_layers(N, rng):
            z = rng.normal(size=2 * N)
            assert symplecticity_residual(layer.jacobian(z)) < 1e-12 * max(1.0, np.linalg.norm(layer.jacobian(z)) ** 2)

    def test_apply_jacobian(self, rng):
        z = rng.normal(size=6)
        V = rng.normal(size=(6, 3))
        for layer in random_layers(3, rng):
            np.testing.assert_allclose(layer.apply_jacobian(z, V), layer.jacobian(z) @ V, atol=1e-13)

    def test_needs_single_state(self):
        with pytest.raises(DimensionError):
            LinearSympLayer(np.eye(2)).jacobian(np.ones((2, 4)))


class TestBackward:
    @pytest.mark.parametrize("activation", ["tanh", "sigmoid"])
    def test_parameter_gradients(self, rng, activation):
        Z = rng.normal(size=(4, 6))
        U = rng.normal(size=(4, 6))
        for layer in random_layers(3, rng, activation):
            _, grads = layer.backward(Z, U)
            for name, value in layer.params.items():
                def loss(v, name=name):
                    trial = layer.copy()
                    setattr(trial, name, v)
                    return float(np.sum(U * trial(Z)))

                fd = fd_gradient(loss, value)
                if name == "S":
                    fd = 0.5 * (fd + fd.T)
                assert rel_err(grads[name], fd) < 1e-5, (type(layer).__name__, name)

    def test_input_gradient(self, rng):
        z = rng.normal(size=6)
        u = rng.normal(size=6)
        for layer in random_layers(3, rng):
            g, _ = layer.backward(z, u)
            np.testing.assert_allclose(g, layer.jacobian(z).T @ u, atol=1e-12)

    def test_S_gradient_formula(self, rng):
        layer = LinearSympLayer(rng.normal(size=(3, 3)), "q")
        z = rng.normal(size=6)
        u = rng.normal(size=6)
        _, grads = layer.backward(z, u)
        G = np.outer(u[:3], z[3:])
        np.testing.assert_allclose(grads["S"], 0.5 * (G + G.T))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            LinearSympLayer(np.eye(2)).backward(np.ones(4), np.ones(3))


class TestBlock:
    def test_empty_block_identity(self, rng):
        z = rng.normal(size=6)
        block = SympNetBlock([], N=3)
        np.testing.assert_array_equal(block(z), z)
        np.testing.assert_array_equal(block.jacobian(z), np.eye(6))
        with pytest.raises(ValueError):
            SympNetBlock([])

    def test_jacobian_is_product(self, rng):
        layers = random_layers(3, rng)
        block = SympNetBlock(layers)
        z = rng.normal(size=6)
        M, x = np.eye(6), z
        for layer in layers:
            M = layer.jacobian(x) @ M
            x = layer(x)
        np.testing.assert_allclose(block.jacobian(z), M, rtol=1e-12, atol=1e-12)
        assert rel_err(block.jacobian(z), fd_jacobian(block.forward, z)) < 1e-7

    def test_six_layer_symplectic(self, rng):
        block = SympNetBlock(random_layers(5, rng))
        for _ in range(10):
            Jz = block.jacobian(rng.normal(size=10))
            assert symplecticity_residual(Jz) < 1e-10 * np.linalg.norm(Jz) ** 2

    def test_inverse_pair(self, rng):
        S = rng.normal(size=(4, 4))
        block = SympNetBlock([LinearSympLayer(S, "q"), LinearSympLayer(-S, "q")])
        z = rng.normal(size=8)
        np.testing.assert_allclose(block(z), z, atol=1e-13)

    def test_backward(self, rng):
        block = SympNetBlock.gradient_pairs(3, 2, a_scale=0.5, rng=rng)
        z, u = rng.normal(size=6), rng.normal(size=6)
        g, grads = block.backward(z, u)
        np.testing.assert_allclose(g, block.jacobian(z).T @ u, atol=1e-12)
        assert len(grads) == 4
        K0 = block.layers[0].K

        def loss(K):
            trial = block.copy()
            trial.layers[0].K = K
            return float(u @ trial(z))

        assert rel_err(grads[0]["K"], fd_gradient(loss, K0)) < 1e-5

    def test_gradient_pairs_layout(self):
        block = SympNetBlock.gradient_pairs(4, 3, width=5, rng=0)
        assert [layer.mode for layer in block] == ["q", "p"] * 3
        assert all(layer.width == 5 and not layer.b.any() for layer in block)
        assert all(np.abs(layer.a).max() <= 0.01 for layer in block)

    def test_mixed_N(self):
        with pytest.raises(DimensionError):
            SympNetBlock([LinearSympLayer(np.eye(2)), LinearSympLayer(np.eye(3))])

    def test_copy_independent(self, rng):
        block = SympNetBlock(random_layers(2, rng))
        other = block.copy()
        other.layers[0].S[:] = 0
        assert block.layers[0].S.any()
