"""Symplectic autoencoder: SympNet blocks interleaved with PSD-like (cotangent lift) layers.

The encoder is ``psi^L o (A^L)^+ o ... o psi^2 o (A^1)^+ o psi^1`` and the
decoder ``psi~ o A~ o ... o psi~``. SympNet weights are trained with Adam;
every ``Phi`` lives on the Stiefel manifold and is trained with the manifold
Adam from :mod:`sympae.manifolds`, so the network stays exactly symplectic
throughout training.

:class:`SymplecticAutoencoderNetwork` holds the stages and is what the
module-level functions operate on. :class:`SymplecticAutoencoder` is the
scikit-learn wrapper (``fit`` / ``transform`` / ``inverse_transform``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionError, ManifoldError, RankDeficiencyError, TrainingError
from .hamiltonian import HamiltonianSystem, poisson_apply, symplecticity_residual
from .integrators import SnapshotMatrix
from .linear import cotangent_lift, psd_cotangent_lift, symplectic_inverse
from .manifolds import (
    AdamState,
    adam_step_euclidean,
    adam_step_stiefel,
    adam_step_stiefel_projected,
    random_stiefel,
    stiefel_residual,
)
from .sympnet import SympNetBlock
from .validation import check_even_features, check_states

logger = logging.getLogger(__name__)

__all__ = [
    "PSDLayer",
    "SymplecticAutoencoderNetwork",
    "ParameterSet",
    "OptimizerConfig",
    "SymplecticAutoencoder",
    "encode",
    "decode",
    "reconstruction_loss",
    "loss_backward",
    "decoder_jacobian",
    "encoder_jacobian",
    "reduced_vector_field",
    "train",
    "FIELD_KINDS",
]

FIELD_KINDS = ("pseudo-inverse", "symplectic-inverse", "hamiltonian-pullback")


class PSDLayer:
    """Cotangent-lift layer ``A = blockdiag(Phi, Phi)`` with ``Phi`` (``N x n``) on St(n, N).

    ``direction="reduce"`` maps ``R^{2N} -> R^{2n}`` with ``A^+ = A^T``;
    ``direction="reconstruct"`` maps ``R^{2n} -> R^{2N}`` with ``A``.
    """

    param_names = ("Phi",)

    def __init__(self, Phi, direction: str = "reduce"):
        if direction not in ("reduce", "reconstruct"):
            raise ValueError("direction must be 'reduce' or 'reconstruct'")
        Phi = np.asarray(Phi, dtype=float)
        if Phi.ndim != 2 or Phi.shape[0] < Phi.shape[1]:
            raise DimensionError(f"Phi must be N x n with N >= n, got {Phi.shape}")
        if stiefel_residual(Phi) > 1e-8:
            raise ManifoldError("Phi does not have orthonormal columns")
        self.Phi = Phi
        self.direction = direction

    @property
    def in_dim(self) -> int:
        N, n = self.Phi.shape
        return 2 * (N if self.direction == "reduce" else n)

    @property
    def out_dim(self) -> int:
        N, n = self.Phi.shape
        return 2 * (n if self.direction == "reduce" else N)

    @property
    def A(self) -> np.ndarray:
        return cotangent_lift(self.Phi)

    def _split(self, Z, half):
        if Z.shape[-1] != 2 * half:
            raise DimensionError(f"PSD layer expects states of length {2 * half}, got {Z.shape[-1]}")
        return Z[..., :half], Z[..., half:]

    def forward(self, z):
        z = np.asarray(z, dtype=float)
        N, n = self.Phi.shape
        if self.direction == "reduce":
            q, p = self._split(z, N)
            return np.concatenate([q @ self.Phi, p @ self.Phi], axis=-1)
        q, p = self._split(z, n)
        return np.concatenate([q @ self.Phi.T, p @ self.Phi.T], axis=-1)

    __call__ = forward

    def jacobian(self, z=None) -> np.ndarray:
        return self.A.T if self.direction == "reduce" else self.A

    def apply_jacobian(self, z, V) -> np.ndarray:
        N, n = self.Phi.shape
        V = np.asarray(V, dtype=float)
        if self.direction == "reduce":
            return np.concatenate([self.Phi.T @ V[:N], self.Phi.T @ V[N:]], axis=0)
        return np.concatenate([self.Phi @ V[:n], self.Phi @ V[n:]], axis=0)

    def backward(self, z, upstream):
        z = np.asarray(z, dtype=float)
        U = np.asarray(upstream, dtype=float)
        Z2, U2 = np.atleast_2d(z), np.atleast_2d(U)
        N, n = self.Phi.shape
        if self.direction == "reduce":
            q, p = self._split(Z2, N)
            uq, up = self._split(U2, n)
            G = np.concatenate([uq @ self.Phi.T, up @ self.Phi.T], axis=1)
            dPhi = q.T @ uq + p.T @ up
        else:
            q, p = self._split(Z2, n)
            uq, up = self._split(U2, N)
            G = np.concatenate([uq @ self.Phi, up @ self.Phi], axis=1)
            dPhi = uq.T @ q + up.T @ p
        return (G[0] if z.ndim == 1 else G), {"Phi": dPhi}

    @property
    def params(self):
        return {"Phi": self.Phi}

    def copy(self):
        return PSDLayer(self.Phi.copy(), self.direction)

    def __repr__(self):
        return f"PSDLayer({self.Phi.shape[0]}x{self.Phi.shape[1]}, {self.direction!r})"


def _stage_forward_cached(stages, z):
    cache = []
    for st in stages:
        if isinstance(st, SympNetBlock):
            out, inputs = st.forward_cached(z)
            cache.append((z, inputs))
        else:
            out = st.forward(z)
            cache.append((z, None))
        z = out
    return z, cache


def _stage_backward(stages, cache, g, prefix):
    grads = {}
    for i in range(len(stages) - 1, -1, -1):
        st = stages[i]
        z_in, inputs = cache[i]
        if isinstance(st, SympNetBlock):
            g, layer_grads = st.backward(z_in, g, inputs)
            for j, lg in enumerate(layer_grads):
                for name, val in lg.items():
                    grads[f"{prefix}.{i}.{j}.{name}"] = val
        else:
            g, pg = st.backward(z_in, g)
            grads[f"{prefix}.{i}.Phi"] = pg["Phi"]
    return g, grads


def _stage_jacobian(stages, z):
    z = np.asarray(z, dtype=float)
    J = np.eye(z.shape[0])
    for st in stages:
        J = st.apply_jacobian(z, J)
        z = st.forward(z)
    return J


@dataclass
class ParameterSet:
    """Parameters (or their gradients) split by geometry, keyed by a dotted path.

    Keys look like ``"enc.0.1.K"`` (stage 0, layer 1, weight K) or
    ``"dec.1.Phi"``.
    """

    euclidean: Dict[str, np.ndarray] = field(default_factory=dict)
    manifold: Dict[str, np.ndarray] = field(default_factory=dict)

    def items(self):
        yield from self.euclidean.items()
        yield from self.manifold.items()

    def __getitem__(self, key):
        if key in self.euclidean:
            return self.euclidean[key]
        return self.manifold[key]

    def keys(self):
        return list(self.euclidean) + list(self.manifold)


class SymplecticAutoencoderNetwork:
    """Encoder and decoder stage lists; see the module docstring for the composition."""

    def __init__(self, encoder_stages: Sequence, decoder_stages: Sequence):
        self.encoder_stages = list(encoder_stages)
        self.decoder_stages = list(decoder_stages)
        self._check_chain(self.encoder_stages, "encoder")
        self._check_chain(self.decoder_stages, "decoder")
        if self.encoder_out != self.decoder_in or self.encoder_in != self.decoder_out:
            raise DimensionError("encoder and decoder dimensions do not match")

    @staticmethod
    def _dims(stage):
        if isinstance(stage, SympNetBlock):
            return stage.dim, stage.dim
        return stage.in_dim, stage.out_dim

    def _check_chain(self, stages, name):
        if not stages:
            raise ValueError(f"{name} needs at least one stage")
        prev = None
        for i, st in enumerate(stages):
            a, b = self._dims(st)
            if prev is not None and a != prev:
                raise DimensionError(f"{name} stage {i} expects input {a}, previous stage gives {prev}")
            prev = b

    @property
    def encoder_in(self):
        return self._dims(self.encoder_stages[0])[0]

    @property
    def encoder_out(self):
        return self._dims(self.encoder_stages[-1])[1]

    @property
    def decoder_in(self):
        return self._dims(self.decoder_stages[0])[0]

    @property
    def decoder_out(self):
        return self._dims(self.decoder_stages[-1])[1]

    @property
    def full_dim(self):
        return self.encoder_in

    @property
    def reduced_dim(self):
        return self.encoder_out

    @classmethod
    def build(
        cls,
        full_dim: int,
        reduced_dim: int,
        hidden_dims: Sequence[int] = (),
        n_gradient_pairs: int = 2,
        width_factor: int = 2,
        activation: str = "tanh",
        a_scale: float = 0.01,
        phis: Optional[Sequence[np.ndarray]] = None,
        rng=None,
    ):
        """Default architecture: gradient-layer pairs around every PSD stage.

        ``hidden_dims`` lists intermediate (even) dimensions between
        ``full_dim`` and ``reduced_dim``. ``phis`` gives the Stiefel matrix of
        each PSD stage from the big end down; random when omitted. Decoder
        stages reuse the encoder's ``Phi`` values as their starting point.
        """
        rng = np.random.default_rng(rng)
        dims = [full_dim, *hidden_dims, reduced_dim]
        for d in dims:
            if d % 2:
                raise DimensionError(f"all dimensions must be even, got {dims}")
        if any(b >= a for a, b in zip(dims, dims[1:])):
            raise DimensionError(f"dimensions must be strictly decreasing, got {dims}")
        halves = [d // 2 for d in dims]
        if phis is None:
            phis = [random_stiefel(a, b, rng) for a, b in zip(halves, halves[1:])]

        def block(N):
            return SympNetBlock.gradient_pairs(N, n_gradient_pairs, width_factor * N, activation, a_scale, rng)

        enc = [block(halves[0])]
        for k, Phi in enumerate(phis):
            enc += [PSDLayer(Phi, "reduce"), block(halves[k + 1])]
        dec = [block(halves[-1])]
        for k in range(len(phis) - 1, -1, -1):
            dec += [PSDLayer(np.array(phis[k], copy=True), "reconstruct"), block(halves[k])]
        return cls(enc, dec)

    # -- parameters ------------------------------------------------------
    def _owners(self):
        for prefix, stages in (("enc", self.encoder_stages), ("dec", self.decoder_stages)):
            for i, st in enumerate(stages):
                if isinstance(st, SympNetBlock):
                    for j, layer in enumerate(st.layers):
                        for name in layer.param_names:
                            yield f"{prefix}.{i}.{j}.{name}", layer, name, False
                else:
                    yield f"{prefix}.{i}.Phi", st, "Phi", True

    def parameters(self) -> ParameterSet:
        ps = ParameterSet()
        for key, owner, name, is_manifold in self._owners():
            (ps.manifold if is_manifold else ps.euclidean)[key] = getattr(owner, name)
        return ps

    def set_parameter(self, key, value):
        for k, owner, name, _ in self._owners():
            if k == key:
                setattr(owner, name, np.asarray(value, dtype=float))
                return
        raise KeyError(key)

    def psd_layers(self) -> List[PSDLayer]:
        return [st for st in self.encoder_stages + self.decoder_stages if isinstance(st, PSDLayer)]

    def copy(self):
        return SymplecticAutoencoderNetwork(
            [st.copy() for st in self.encoder_stages], [st.copy() for st in self.decoder_stages]
        )

    # -- evaluation ------------------------------------------------------
    def encode(self, z):
        return encode(self, z)

    def decode(self, x):
        return decode(self, x)

    def __repr__(self):
        return f"SymplecticAutoencoderNetwork({self.full_dim} -> {self.reduced_dim})"


def _run(stages, z, what):
    z = np.asarray(z, dtype=float)
    for i, st in enumerate(stages):
        try:
            z = st.forward(z)
        except DimensionError as exc:
            raise DimensionError(f"{what} stage {i}: {exc}") from exc
    return z


def encode(model: SymplecticAutoencoderNetwork, z):
    """Reduce a state (or rows of states) from ``2N`` to ``2n``."""
    return _run(model.encoder_stages, z, "encoder")


def decode(model: SymplecticAutoencoderNetwork, x):
    """Reconstruct a reduced state (or rows) from ``2n`` to ``2N``."""
    return _run(model.decoder_stages, x, "decoder")


def _batch_rows(batch, dim):
    if isinstance(batch, SnapshotMatrix):
        X = batch.data.T
    else:
        X = np.asarray(batch, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if X.shape[1] != dim:
        raise DimensionError(f"batch has {X.shape[1]} features, model expects {dim}")
    return X


def reconstruction_loss(model: SymplecticAutoencoderNetwork, batch) -> float:
    """Mean over samples of ``||x - decode(encode(x))||^2``.

    ``batch`` holds samples as rows; a :class:`SnapshotMatrix` (samples as
    columns) is transposed automatically.
    """
    X = _batch_rows(batch, model.full_dim)
    R = X - decode(model, encode(model, X))
    return float(np.sum(R * R) / X.shape[0])


def loss_backward(model: SymplecticAutoencoderNetwork, batch) -> Tuple[float, ParameterSet]:
    """Loss and exact Euclidean gradients of every parameter (``Phi`` included)."""
    X = _batch_rows(batch, model.full_dim)
    Zr, enc_cache = _stage_forward_cached(model.encoder_stages, X)
    Y, dec_cache = _stage_forward_cached(model.decoder_stages, Zr)
    R = Y - X
    loss = float(np.sum(R * R) / X.shape[0])
    g = 2.0 * R / X.shape[0]
    g, dec_grads = _stage_backward(model.decoder_stages, dec_cache, g, "dec")
    _, enc_grads = _stage_backward(model.encoder_stages, enc_cache, g, "enc")
    grads = ParameterSet()
    all_grads = {**enc_grads, **dec_grads}
    for key, _, _, is_manifold in model._owners():
        (grads.manifold if is_manifold else grads.euclidean)[key] = all_grads[key]
    return loss, grads


def decoder_jacobian(model: SymplecticAutoencoderNetwork, x) -> np.ndarray:
    """``2N x 2n`` Jacobian of the decoder at a single reduced state."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.reduced_dim,):
        raise DimensionError(f"reduced state must have shape ({model.reduced_dim},), got {x.shape}")
    return _stage_jacobian(model.decoder_stages, x)


def encoder_jacobian(model: SymplecticAutoencoderNetwork, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (model.full_dim,):
        raise DimensionError(f"state must have shape ({model.full_dim},), got {z.shape}")
    return _stage_jacobian(model.encoder_stages, z)


def reduced_vector_field(model: SymplecticAutoencoderNetwork, fom, kind: str = "pseudo-inverse", fom_field=None, cond_limit: float = 1e12):
    """Reduced dynamics ``x -> xdot`` induced by the decoder.

    ``fom`` is a :class:`HamiltonianSystem` (or any object with ``as_system``);
    ``fom_field(t, z)`` overrides its vector field when given, which is how
    non-canonical scalings such as the wave FOM's are respected. Kinds:

    ``"pseudo-inverse"``
        least-squares solve of ``J_dec xdot = f(decode(x))``.
    ``"symplectic-inverse"``
        ``xdot = J_{2n} J_dec^T J_{2N}^T f(decode(x))``.
    ``"hamiltonian-pullback"``
        ``xdot = J_{2n} grad_x (H o decode)(x)``, gradient by decoder backprop.
    """
    if kind not in FIELD_KINDS:
        raise ValueError(f"kind must be one of {FIELD_KINDS}")
    system = fom.as_system() if hasattr(fom, "as_system") else fom
    if fom_field is None:
        if callable(fom) and not isinstance(fom, HamiltonianSystem):
            fom_field = fom
        else:
            fom_field = system.vector_field
    if isinstance(system, HamiltonianSystem) and 2 * system.N != model.full_dim:
        raise DimensionError(f"FOM dimension {2 * system.N} does not match decoder output {model.full_dim}")

    if kind == "hamiltonian-pullback":

        def field_(t, x):
            x = np.asarray(x, dtype=float)
            z, cache = _stage_forward_cached(model.decoder_stages, x)
            g, _ = _stage_backward(model.decoder_stages, cache, system.gradient(z), "dec")
            return poisson_apply(g)

        return field_

    def field_(t, x):
        x = np.asarray(x, dtype=float)
        Jd = decoder_jacobian(model, x)
        f = fom_field(t, decode(model, x))
        if kind == "symplectic-inverse":
            return symplectic_inverse(Jd) @ f
        s = np.linalg.svd(Jd, compute_uv=False)
        if s[-1] == 0 or s[0] / s[-1] > cond_limit:
            raise RankDeficiencyError(f"decoder Jacobian is ill-conditioned (cond={s[0] / max(s[-1], 1e-300):.3e})")
        return np.linalg.lstsq(Jd, f, rcond=None)[0]

    return field_


@dataclass
class OptimizerConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.99
    delta: float = 1e-8
    manifold_adam: str = "global"  # or "projected"

    def __post_init__(self):
        if self.manifold_adam not in ("global", "projected"):
            raise ValueError("manifold_adam must be 'global' or 'projected'")

    def new_state(self) -> AdamState:
        return AdamState(self.learning_rate, self.beta1, self.beta2, self.delta)


def train(
    model: SymplecticAutoencoderNetwork,
    data,
    epochs: int = 30,
    batch_size: int = 64,
    optimizer: Optional[OptimizerConfig] = None,
    rng=None,
    states: Optional[Dict[str, AdamState]] = None,
):
    """Minibatch training; returns ``(model, loss_history, states)``.

    ``model`` is updated in place. One loss entry per epoch (mean over
    batches). Euclidean weights go through Adam and every ``Phi`` through the
    Stiefel Adam. ``states`` lets a previous optimizer cache be resumed.
    """
    optimizer = optimizer or OptimizerConfig()
    rng = np.random.default_rng(rng)
    X = _batch_rows(data, model.full_dim)
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    if X.shape[0] < batch_size:
        raise ValueError(f"need at least batch_size={batch_size} samples, got {X.shape[0]}")
    stiefel_step = adam_step_stiefel if optimizer.manifold_adam == "global" else adam_step_stiefel_projected
    states = {} if states is None else states
    history: List[float] = []
    n = X.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        losses = []
        for b, start in enumerate(range(0, n, batch_size)):
            idx = order[start:start + batch_size]
            loss, grads = loss_backward(model, X[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            params = model.parameters()
            for key, G in grads.euclidean.items():
                st = states.get(key) or optimizer.new_state()
                theta, states[key] = adam_step_euclidean(params[key], G, st)
                model.set_parameter(key, theta)
            for key, G in grads.manifold.items():
                st = states.get(key) or optimizer.new_state()
                point, states[key] = stiefel_step(params[key], G, st)
                model.set_parameter(key, point.Y)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        logger.debug("epoch %d loss %.6e", epoch, history[-1])
    for layer in model.psd_layers():
        if stiefel_residual(layer.Phi) > 1e-8:
            raise ManifoldError("a PSD layer left the Stiefel manifold during training")
    return model, history, states


class SymplecticAutoencoder(TransformerMixin, BaseEstimator):
    """Symplectic autoencoder as a scikit-learn transformer.

    Samples are rows of ``X`` with ``(q, p)`` columns. ``transform`` encodes
    to ``reduced_dim`` and ``inverse_transform`` decodes.

    Parameters
    ----------
    reduced_dim : int
        Even reduced dimension ``2n``.
    hidden_dims : tuple of int
        Intermediate even dimensions between the full and reduced ones.
    n_gradient_pairs : int
        GradientQ/GradientP pairs in every SympNet block.
    width_factor : int
        Hidden width ``L`` of a gradient layer as a multiple of its ``N``.
    activation : {"tanh", "sigmoid"}
    init : {"psd", "random"}
        ``"psd"`` warm-starts every ``Phi`` from a cotangent-lift PSD of the
        (stage-wise encoded) training data.
    epochs, batch_size, learning_rate, beta1, beta2, delta
        Training schedule and Adam hyperparameters.
    manifold_adam : {"global", "projected"}
        Where the Stiefel Adam cache lives.
    a_scale : float
        Half-width of the uniform initialization of the ``a`` vectors.
    random_state : int, Generator or None

    Attributes
    ----------
    network_ : SymplecticAutoencoderNetwork
    loss_history_ : list of float
    initial_network_ : SymplecticAutoencoderNetwork
        The network before training (the PSD warm start for ``init="psd"``).
    """

    def __init__(
        self,
        reduced_dim=2,
        hidden_dims=(),
        n_gradient_pairs=2,
        width_factor=2,
        activation="tanh",
        init="psd",
        epochs=30,
        batch_size=64,
        learning_rate=0.001,
        beta1=0.9,
        beta2=0.99,
        delta=1e-8,
        manifold_adam="global",
        a_scale=0.01,
        random_state=None,
    ):
        self.reduced_dim = reduced_dim
        self.hidden_dims = hidden_dims
        self.n_gradient_pairs = n_gradient_pairs
        self.width_factor = width_factor
        self.activation = activation
        self.init = init
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.delta = delta
        self.manifold_adam = manifold_adam
        self.a_scale = a_scale
        self.random_state = random_state

    def _optimizer(self):
        return OptimizerConfig(self.learning_rate, self.beta1, self.beta2, self.delta, self.manifold_adam)

    def _init_network(self, X, rng):
        dims = [X.shape[1], *self.hidden_dims, self.reduced_dim]
        if self.init == "random":
            return SymplecticAutoencoderNetwork.build(
                X.shape[1], self.reduced_dim, self.hidden_dims, self.n_gradient_pairs,
                self.width_factor, self.activation, self.a_scale, None, rng,
            )
        if self.init != "psd":
            raise ValueError("init must be 'psd' or 'random'")
        # warm start each stage from the data pushed through the previous PSD stages
        phis, Z = [], X
        for d in dims[1:]:
            Phi = psd_cotangent_lift(Z.T, d // 2).Phi
            phis.append(Phi)
            Z = PSDLayer(Phi, "reduce").forward(Z)
        return SymplecticAutoencoderNetwork.build(
            X.shape[1], self.reduced_dim, self.hidden_dims, self.n_gradient_pairs,
            self.width_factor, self.activation, self.a_scale, phis, rng,
        )

    def fit(self, X, y=None):
        X = check_even_features(check_states(X))
        if self.reduced_dim % 2 or self.reduced_dim >= X.shape[1]:
            raise DimensionError(f"reduced_dim must be even and below {X.shape[1]}, got {self.reduced_dim}")
        self.n_features_in_ = X.shape[1]
        rng = np.random.default_rng(self.random_state)
        self.network_ = self._init_network(X, rng)
        self.initial_network_ = self.network_.copy()
        _, self.loss_history_, self.optimizer_states_ = train(
            self.network_, X, self.epochs, min(self.batch_size, X.shape[0]), self._optimizer(), rng
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "network_")
        X = check_states(X, n_features=self.n_features_in_)
        return encode(self.network_, X)

    def inverse_transform(self, Z):
        check_is_fitted(self, "network_")
        Z = check_states(Z, n_features=self.reduced_dim)
        return decode(self.network_, Z)

    def reconstruction_loss(self, X) -> float:
        check_is_fitted(self, "network_")
        return reconstruction_loss(self.network_, check_states(X, n_features=self.n_features_in_))

    def score(self, X, y=None) -> float:
        """Negative mean squared reconstruction error (higher is better)."""
        return -self.reconstruction_loss(X)

    def reduced_vector_field(self, fom, kind="pseudo-inverse", fom_field=None):
        check_is_fitted(self, "network_")
        return reduced_vector_field(self.network_, fom, kind, fom_field)

    def decoder_jacobian(self, x):
        check_is_fitted(self, "network_")
        return decoder_jacobian(self.network_, x)

    def symplecticity_residuals(self, X) -> np.ndarray:
        """Decoder Jacobian residual at the encoding of every row of ``X``."""
        Z = self.transform(X)
        return np.array([symplecticity_residual(decoder_jacobian(self.network_, z)) for z in Z])
