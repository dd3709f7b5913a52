"""SympNet layers (linear, activation, gradient) with exact Jacobians and backprop.

Every layer is a shear: in ``"q"`` mode it maps ``(q, p) -> (q + f(p), p)``
and in ``"p"`` mode ``(q, p) -> (q, p + f(q))``, where ``f`` is the gradient
of a scalar potential, so the Jacobian ``[[I, D], [0, I]]`` has ``D``
symmetric and the map is symplectic.

Batches are row-major: ``Z`` has shape ``(batch, 2N)``; a single 1-d state is
accepted everywhere and returned as 1-d.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence

import numpy as np

from .exceptions import DimensionError

__all__ = [
    "Activation",
    "TANH",
    "SIGMOID",
    "get_activation",
    "LinearSympLayer",
    "ActivationSympLayer",
    "GradientSympLayer",
    "GradientQ",
    "GradientP",
    "SympNetBlock",
    "layer_forward",
    "layer_jacobian",
    "layer_backward",
]


class Activation:
    """Scalar nonlinearity with its derivative, applied elementwise."""

    def __init__(self, kind: str):
        if kind not in ("tanh", "sigmoid"):
            raise ValueError(f"unknown activation {kind!r}")
        self.kind = kind

    def __call__(self, x):
        if self.kind == "tanh":
            return np.tanh(x)
        return 0.5 * (1.0 + np.tanh(0.5 * x))

    def derivative(self, x):
        if self.kind == "tanh":
            return 1.0 - np.tanh(x) ** 2
        s = 0.5 * (1.0 + np.tanh(0.5 * x))
        return s * (1.0 - s)

    def __eq__(self, other):
        return isinstance(other, Activation) and other.kind == self.kind

    def __hash__(self):
        return hash(self.kind)

    def __repr__(self):
        return f"Activation({self.kind!r})"


TANH = Activation("tanh")
SIGMOID = Activation("sigmoid")


def get_activation(act) -> Activation:
    if isinstance(act, Activation):
        return act
    return Activation(act)


def _batch(z):
    z = np.asarray(z, dtype=float)
    return (z[None, :], True) if z.ndim == 1 else (z, False)


class _SympLayer:
    """Shared shear machinery; subclasses define the potential's gradient ``f``."""

    param_names: Sequence[str] = ()

    def __init__(self, N: int, mode: str):
        if mode not in ("q", "p"):
            raise ValueError("mode must be 'q' or 'p'")
        self.N = int(N)
        self.mode = mode

    # --- to be provided by subclasses -------------------------------------
    def _f(self, X):
        raise NotImplementedError

    def _f_backward(self, X, U):
        """Return ``(D^T U, param_grads)`` for rows ``X`` (the driving block) and ``U``."""
        raise NotImplementedError

    def _D(self, x):
        raise NotImplementedError

    def _D_apply(self, x, W):
        return self._D(x) @ W

    # ----------------------------------------------------------------------
    @property
    def dim(self) -> int:
        return 2 * self.N

    @property
    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.param_names}

    def _split(self, Z):
        if Z.shape[-1] != 2 * self.N:
            raise DimensionError(f"layer expects states of length {2 * self.N}, got {Z.shape[-1]}")
        return Z[:, : self.N], Z[:, self.N:]

    def forward(self, z):
        Z, single = _batch(z)
        q, p = self._split(Z)
        if self.mode == "q":
            out = np.concatenate([q + self._f(p), p], axis=1)
        else:
            out = np.concatenate([q, p + self._f(q)], axis=1)
        return out[0] if single else out

    __call__ = forward

    def jacobian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (2 * self.N,):
            raise DimensionError(f"jacobian needs a single state of length {2 * self.N}")
        N = self.N
        J = np.eye(2 * N)
        if self.mode == "q":
            J[:N, N:] = self._D(z[N:])
        else:
            J[N:, :N] = self._D(z[:N])
        return J

    def apply_jacobian(self, z, V) -> np.ndarray:
        """``jacobian(z) @ V`` for a ``(2N, k)`` matrix ``V`` without forming the Jacobian."""
        z = np.asarray(z, dtype=float)
        V = np.asarray(V, dtype=float)
        N = self.N
        if self.mode == "q":
            return np.concatenate([V[:N] + self._D_apply(z[N:], V[N:]), V[N:]], axis=0)
        return np.concatenate([V[:N], V[N:] + self._D_apply(z[:N], V[:N])], axis=0)

    def backward(self, z, upstream):
        """Gradient of ``sum(upstream * forward(z))`` w.r.t. the input and the parameters."""
        Z, single = _batch(z)
        U, _ = _batch(upstream)
        if U.shape != Z.shape:
            raise DimensionError(f"upstream shape {U.shape} does not match input {Z.shape}")
        q, p = self._split(Z)
        uq, up = self._split(U)
        if self.mode == "q":
            extra, grads = self._f_backward(p, uq)
            G = np.concatenate([uq, up + extra], axis=1)
        else:
            extra, grads = self._f_backward(q, up)
            G = np.concatenate([uq + extra, up], axis=1)
        return (G[0] if single else G), grads

    def copy(self):
        new = object.__new__(type(self))
        new.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()})
        return new

    def __repr__(self):
        return f"{type(self).__name__}(N={self.N}, mode={self.mode!r})"


class LinearSympLayer(_SympLayer):
    """``q <- q + S p`` (mode ``"q"``) or ``p <- p + S q`` (mode ``"p"``) with ``S`` symmetric."""

    param_names = ("S",)

    def __init__(self, S, mode: str = "q"):
        S = np.atleast_2d(np.asarray(S, dtype=float))
        if S.shape[0] != S.shape[1]:
            raise DimensionError("S must be square")
        super().__init__(S.shape[0], mode)
        self.S = 0.5 * (S + S.T)

    @classmethod
    def zeros(cls, N, mode="q"):
        return cls(np.zeros((N, N)), mode)

    def _f(self, X):
        return X @ self.S

    def _D(self, x):
        return self.S.copy()

    def _D_apply(self, x, W):
        return self.S @ W

    def _f_backward(self, X, U):
        G = U.T @ X
        return U @ self.S, {"S": 0.5 * (G + G.T)}


class ActivationSympLayer(_SympLayer):
    """``q <- q + diag(a) sigma(p)`` or the ``p`` counterpart."""

    param_names = ("a",)

    def __init__(self, a, activation="tanh", mode: str = "q"):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        super().__init__(a.shape[0], mode)
        self.a = a
        self.activation = get_activation(activation)

    def _f(self, X):
        return self.a * self.activation(X)

    def _D(self, x):
        return np.diag(self.a * self.activation.derivative(x))

    def _D_apply(self, x, W):
        return (self.a * self.activation.derivative(x))[:, None] * W

    def _f_backward(self, X, U):
        return U * self.a * self.activation.derivative(X), {"a": np.sum(U * self.activation(X), axis=0)}


class GradientSympLayer(_SympLayer):
    """``q <- q + K^T diag(a) sigma(K p + b)`` (GradientQ) or the ``p`` update (GradientP).

    ``K`` has shape ``(L, N)`` for an arbitrary hidden width ``L``.
    """

    param_names = ("K", "a", "b")

    def __init__(self, K, a, b, activation="tanh", mode: str = "q"):
        K = np.atleast_2d(np.asarray(K, dtype=float))
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.shape != (K.shape[0],) or b.shape != (K.shape[0],):
            raise DimensionError(f"a and b must have length L={K.shape[0]}")
        super().__init__(K.shape[1], mode)
        self.K, self.a, self.b = K, a, b
        self.activation = get_activation(activation)

    @classmethod
    def random(cls, N, mode="q", width=None, activation="tanh", a_scale=0.01, rng=None):
        """Near-identity initialization: small uniform ``a``, ``b = 0``, ``K ~ N(0, 1/N)``."""
        rng = np.random.default_rng(rng)
        L = 2 * N if width is None else width
        K = rng.normal(scale=1.0 / np.sqrt(N), size=(L, N))
        a = rng.uniform(-a_scale, a_scale, size=L)
        return cls(K, a, np.zeros(L), activation, mode)

    @property
    def width(self) -> int:
        return self.K.shape[0]

    def _f(self, X):
        return (self.a * self.activation(X @ self.K.T + self.b)) @ self.K

    def _D(self, x):
        d = self.a * self.activation.derivative(self.K @ x + self.b)
        return self.K.T @ (d[:, None] * self.K)

    def _D_apply(self, x, W):
        d = self.a * self.activation.derivative(self.K @ x + self.b)
        return self.K.T @ (d[:, None] * (self.K @ W))

    def _f_backward(self, X, U):
        H = X @ self.K.T + self.b
        W = self.a * self.activation(H)
        KU = U @ self.K.T
        V = KU * self.a * self.activation.derivative(H)
        grads = {
            "K": W.T @ U + V.T @ X,
            "a": np.sum(KU * self.activation(H), axis=0),
            "b": np.sum(V, axis=0),
        }
        return V @ self.K, grads


def GradientQ(K, a, b, activation="tanh"):
    return GradientSympLayer(K, a, b, activation, mode="q")


def GradientP(K, a, b, activation="tanh"):
    return GradientSympLayer(K, a, b, activation, mode="p")


def layer_forward(layer, z):
    return layer.forward(z)


def layer_jacobian(layer, z):
    return layer.jacobian(z)


def layer_backward(layer, z, upstream):
    return layer.backward(z, upstream)


class SympNetBlock:
    """Ordered composition of SympNet layers sharing the half-dimension ``N``.

    An empty block is the identity on ``R^{2N}``.
    """

    def __init__(self, layers: Optional[List[_SympLayer]] = None, N: Optional[int] = None):
        self.layers = list(layers or [])
        if self.layers:
            N = self.layers[0].N if N is None else N
            for i, layer in enumerate(self.layers):
                if layer.N != N:
                    raise DimensionError(f"layer {i} has N={layer.N}, block has N={N}")
        if N is None:
            raise ValueError("an empty block needs an explicit N")
        self.N = int(N)

    @classmethod
    def gradient_pairs(cls, N, n_pairs=2, width=None, activation="tanh", a_scale=0.01, rng=None):
        """``n_pairs`` alternating GradientQ/GradientP layers with near-identity init."""
        rng = np.random.default_rng(rng)
        layers = []
        for _ in range(n_pairs):
            for mode in ("q", "p"):
                layers.append(GradientSympLayer.random(N, mode, width, activation, a_scale, rng))
        return cls(layers, N)

    @property
    def dim(self) -> int:
        return 2 * self.N

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def forward(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != 2 * self.N:
            raise DimensionError(f"block expects states of length {2 * self.N}, got {z.shape[-1]}")
        for layer in self.layers:
            z = layer.forward(z)
        return z

    __call__ = forward

    def forward_cached(self, z):
        """Forward pass that also returns every layer's input (for backward)."""
        inputs = []
        z = np.asarray(z, dtype=float)
        for layer in self.layers:
            inputs.append(z)
            z = layer.forward(z)
        return z, inputs

    def jacobian(self, z) -> np.ndarray:
        return self.apply_jacobian(z, np.eye(2 * self.N))

    def apply_jacobian(self, z, V) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        for layer in self.layers:
            V = layer.apply_jacobian(z, V)
            z = layer.forward(z)
        return V

    def backward(self, z, upstream, inputs=None):
        """Returns the input gradient and one parameter-gradient dict per layer."""
        if inputs is None:
            _, inputs = self.forward_cached(z)
        g = np.asarray(upstream, dtype=float)
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            g, grads[i] = self.layers[i].backward(inputs[i], g)
        return g, grads

    def copy(self):
        return SympNetBlock([layer.copy() for layer in self.layers], self.N)

    def __repr__(self):
        return f"SympNetBlock(N={self.N}, layers={self.layers!r})"


def block_forward(block, z):
    return block.forward(z)


def block_jacobian(block, z):
    return block.jacobian(z)


def block_backward(block, z, upstream):
    return block.backward(z, upstream)


__all__ += ["block_forward", "block_jacobian", "block_backward"]
