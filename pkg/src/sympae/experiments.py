"""Experiment orchestration: data generation, training, error measures, reports.

The wave pipeline is ``generate_wave_data -> train_models -> evaluate``;
:func:`run_experiment` chains all three. The torus diagnostic lives in
:func:`torus_demo`.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from threadpoolctl import threadpool_limits

from .autoencoder import SymplecticAutoencoder, SymplecticAutoencoderNetwork, decode, encode
from .autoencoder import reduced_vector_field as sae_reduced_field
from .config import ExperimentConfig
from .exceptions import DimensionError, SolverError
from .hamiltonian import LinearWaveFOM, OscillatorFOM
from .integrators import (
    IntegratorConfig,
    LinearField,
    SnapshotMatrix,
    Trajectory,
    build_snapshot_matrix,
    integrate,
)
from .linear import POD, PSD, PODBasis, PSDBasis, pod, psd_cotangent_lift, symplectic_inverse

logger = logging.getLogger(__name__)

__all__ = [
    "REPORT_COLUMNS",
    "ErrorRecord",
    "ErrorReport",
    "TrainedModels",
    "TORUS_PHI",
    "TORUS_Z0",
    "torus_analytic_bases",
    "torus_demo",
    "wave_trajectory",
    "generate_wave_data",
    "compute_projection_error",
    "compute_reduction_error",
    "train_models",
    "evaluate",
    "run_experiment",
    "merge_reports",
]

REPORT_COLUMNS = ("method", "mu", "reduced_dim", "e_proj", "e_red", "train_loss", "wall_s")

TORUS_PHI = (0.05, np.pi)
TORUS_Z0 = (0.0, 0.0, 1.0, 3.0)


def _map(fn, items, threads: int):
    """Ordered map; results come back in input order whatever the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# error measures


def _rows(traj) -> np.ndarray:
    X = traj.states.T if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float).T
    if X.size == 0:
        raise ValueError("trajectory is empty")
    return X


def _relative_l2(X, Xr) -> float:
    den = float(np.sum(X * X))
    if den == 0.0:
        raise ZeroDivisionError("trajectory is identically zero; relative error is undefined")
    return float(np.sqrt(np.sum((X - Xr) ** 2) / den))


def _reducer_maps(model):
    """``(reduce, reconstruct)`` acting on row-stacked states."""
    if isinstance(model, tuple):
        return model
    if isinstance(model, SymplecticAutoencoderNetwork):
        return (lambda X: encode(model, X)), (lambda Z: decode(model, Z))
    if isinstance(model, PSDBasis):
        A, Ap = model.A, model.A_plus
        return (lambda X: X @ Ap.T), (lambda Z: Z @ A.T)
    if isinstance(model, PODBasis):
        A = model.A
        return (lambda X: X @ A), (lambda Z: Z @ A.T)
    if hasattr(model, "transform") and hasattr(model, "inverse_transform"):
        return model.transform, model.inverse_transform
    raise TypeError(f"cannot derive reduce/reconstruct maps from {type(model).__name__}")


def compute_projection_error(traj, reduce, reconstruct=None) -> float:
    """``sqrt(sum_t |x_t - R(P(x_t))|^2 / sum_t |x_t|^2)``.

    ``traj`` is a :class:`Trajectory` (or a ``2N x T`` array). Either pass the
    two row-wise maps, or a single fitted reducer (estimator, basis, network)
    as ``reduce``.
    """
    X = _rows(traj)
    if reconstruct is None:
        reduce, reconstruct = _reducer_maps(reduce)
    return _relative_l2(X, reconstruct(reduce(X)))


def _linear_rom_matrix(model, fom) -> Optional[np.ndarray]:
    """Reduced matrix for linear bases on linear FOMs, else ``None``."""
    if not hasattr(fom, "matrix"):
        return None
    if isinstance(model, PSD):
        model = model.basis_
    elif isinstance(model, POD):
        model = model.basis_
    if isinstance(model, PSDBasis):
        return model.A_plus @ fom.matrix() @ model.A
    if isinstance(model, PODBasis):
        return model.A.T @ fom.matrix() @ model.A
    return None


def _nonlinear_rom_field(model, fom, kind):
    if isinstance(model, SymplecticAutoencoder):
        model = model.network_
    if isinstance(model, SymplecticAutoencoderNetwork):
        return sae_reduced_field(model, fom, kind, fom_field=fom)
    raise TypeError(f"no reduced vector field for {type(model).__name__}")


def compute_reduction_error(
    fom_traj: Trajectory,
    model,
    fom,
    step_size: Optional[float] = None,
    field_kind: str = "symplectic-inverse",
    solver: str = "newton",
    tolerance: float = 1e-10,
    max_iterations: int = 50,
    substeps: int = 1,
    max_substeps: Optional[int] = None,
) -> float:
    """Relative L2 distance between the FOM trajectory and the reconstructed ROM solution.

    The ROM starts from ``P(x_0)`` and is integrated with implicit midpoint on
    the FOM time grid (each interval optionally split into ``substeps``).
    Linear bases on linear FOMs use the exact Cayley solve; autoencoders use
    ``solver``. When the nonlinear solve fails, the whole ROM run is repeated
    with twice the substeps while that stays within ``max_substeps``; the
    final failure raises :class:`SolverError` carrying the FOM step index.
    """
    max_substeps = substeps if max_substeps is None else max_substeps
    X = _rows(fom_traj)
    times = fom_traj.times
    if times.size < 2:
        raise ValueError("need at least two time points")
    h = float(np.mean(np.diff(times))) if step_size is None else float(step_size)
    if not np.allclose(np.diff(times), h, rtol=1e-9, atol=1e-12):
        raise ValueError("ROM must run on the FOM's uniform time grid")
    reduce, reconstruct = _reducer_maps(model)
    x0 = reduce(X[:1])[0]
    n_steps = times.size - 1

    B = _linear_rom_matrix(model, fom)
    if B is not None:
        cfg = IntegratorConfig(h, tolerance, max_iterations, "direct-linear")
        rom = integrate(LinearField(B), x0, times[0], n_steps, cfg)
        Xr = rom.states.T
    else:
        field_ = _nonlinear_rom_field(model, fom, field_kind)
        k = substeps
        while True:
            cfg = IntegratorConfig(h / k, tolerance, max_iterations, solver)
            try:
                rom = integrate(field_, x0, times[0], n_steps * k, cfg)
                break
            except SolverError as exc:
                if 2 * k <= max_substeps:
                    logger.warning("ROM solve failed with %d substeps (%s); retrying with %d", k, exc, 2 * k)
                    k *= 2
                    continue
                exc.step = None if exc.step is None else exc.step // k
                exc.args = (f"ROM integration failed near FOM step {exc.step}: {exc.args[0]}",)
                raise
        Xr = rom.states[:, ::k].T
    return _relative_l2(X, reconstruct(Xr))


# ---------------------------------------------------------------------------
# torus diagnostic


def torus_analytic_bases() -> Tuple[np.ndarray, np.ndarray]:
    """The limiting POD and PSD bases of the two-oscillator torus, as ``4 x 2`` matrices."""
    A_pod = np.zeros((4, 2))
    A_pod[0, 0] = A_pod[3, 1] = 1.0
    A_psd = np.zeros((4, 2))
    A_psd[0, 0] = A_psd[2, 1] = 1.0
    return A_pod, A_psd


def torus_demo(n_points: int = 100, n_steps: int = 20000, step_size: float = 0.05, rng=None) -> Dict:
    """POD versus PSD on two uncoupled oscillators with incommensurate frequencies.

    Returns a dict with the field checks at ``n_points`` random reduced
    states (analytic bases), the numerically fitted bases, and the point
    clouds ``A A^T M`` (POD) and ``A A^+ M`` (PSD) embedded in 3D by
    ``(q1 + q2, p1, p2)``.
    """
    rng = np.random.default_rng(rng)
    fom = OscillatorFOM(TORUS_PHI)
    B = fom.matrix()
    A_pod, A_psd = torus_analytic_bases()
    pts = rng.normal(size=(n_points, 2))

    pod_field = pts @ (A_pod.T @ B @ A_pod).T
    psd_field = pts @ (symplectic_inverse(A_psd) @ B @ A_psd).T
    expected = np.column_stack([pts[:, 1], -TORUS_PHI[0] * pts[:, 0]])
    pod_max = float(np.max(np.abs(pod_field)))
    psd_err = float(np.max(np.abs(psd_field - expected)))

    cfg = IntegratorConfig(step_size)
    traj = integrate(fom, np.array(TORUS_Z0), 0.0, n_steps, cfg)
    M = traj.states
    pod_num = pod(M, 1).A
    psd_num = psd_cotangent_lift(M, 1).A

    def embed(Z):
        return np.column_stack([Z[:, 0] + Z[:, 1], Z[:, 2], Z[:, 3]])

    cloud_pod = embed((A_pod @ A_pod.T @ M).T)
    cloud_psd = embed((A_psd @ symplectic_inverse(A_psd) @ M).T)
    return {
        "pod_field_max": pod_max,
        "psd_field_error": psd_err,
        "pod_zero_field": pod_max == 0.0,
        "psd_oscillator": psd_err < 1e-12,
        "pod_alignment": np.abs(pod_num.T @ np.eye(4)[:, [0, 3]]).max(axis=0),
        "psd_alignment": float(abs(psd_num[0, 0])),
        "A_pod_numeric": pod_num,
        "A_psd_numeric": psd_num,
        "trajectory": traj,
        "cloud_pod": cloud_pod,
        "cloud_psd": cloud_psd,
    }


# ---------------------------------------------------------------------------
# wave experiment


def wave_trajectory(mu: float, cfg: ExperimentConfig) -> Trajectory:
    fom = LinearWaveFOM(mu, cfg.fom.n_tilde, cfg.fom.literal_K)
    icfg = IntegratorConfig(cfg.time.step_size, cfg.time.solver_tolerance)
    return integrate(fom, fom.initial_condition(), 0.0, cfg.time.n_steps, icfg, parameter=mu)


def generate_wave_data(cfg: ExperimentConfig, threads: int = 1) -> SnapshotMatrix:
    """FOM trajectories over the training grid, stacked in parameter order."""
    mus = cfg.fom.mu_grid()
    with threadpool_limits(1):
        trajs = _map(lambda m: wave_trajectory(float(m), cfg), mus, threads)
    return build_snapshot_matrix(trajs)


@dataclass
class TrainedModels:
    """PSD baselines and autoencoders keyed by reduced dimension ``2n``."""

    psd: Dict[int, PSD] = field(default_factory=dict)
    sae: Dict[int, SymplecticAutoencoder] = field(default_factory=dict)
    train_seconds: Dict[int, float] = field(default_factory=dict)


def _sae_estimator(cfg: ExperimentConfig, d: int, seed) -> SymplecticAutoencoder:
    a, t = cfg.architecture, cfg.training
    return SymplecticAutoencoder(
        reduced_dim=d,
        hidden_dims=tuple(a.hidden_dims),
        n_gradient_pairs=a.n_gradient_pairs,
        width_factor=a.width_factor,
        activation=a.activation,
        init=a.init,
        epochs=t.epochs,
        batch_size=t.batch_size,
        learning_rate=t.learning_rate,
        beta1=t.beta1,
        beta2=t.beta2,
        delta=t.delta,
        manifold_adam=t.manifold_adam,
        a_scale=a.a_scale,
        random_state=seed,
    )


def _model_seeds(seed: int, dims: Sequence[int]) -> Dict[int, np.random.SeedSequence]:
    """Independent, order-free seed per reduced dimension."""
    return {d: np.random.SeedSequence([int(seed), int(d)]) for d in dims}


def train_models(cfg: ExperimentConfig, snapshots: SnapshotMatrix, threads: int = 1) -> TrainedModels:
    X = snapshots.data.T
    dims = list(cfg.evaluation.reduced_dims)
    seeds = _model_seeds(cfg.seed, dims)

    def fit_one(d):
        t0 = time.perf_counter()
        psd = PSD(d // 2).fit(X)
        sae = _sae_estimator(cfg, d, np.random.default_rng(seeds[d])).fit(X)
        return psd, sae, time.perf_counter() - t0

    out = TrainedModels()
    with threadpool_limits(1):
        results = _map(fit_one, dims, threads)
    for d, (psd, sae, secs) in zip(dims, results):
        out.psd[d], out.sae[d], out.train_seconds[d] = psd, sae, secs
        logger.info("2n=%d trained in %.1fs, final loss %s", d, secs, sae.loss_history_[-1] if sae.loss_history_ else "n/a")
    return out


@dataclass
class ErrorRecord:
    method: str
    mu: float
    reduced_dim: int
    e_proj: float
    e_red: float
    train_loss: float
    wall_s: float = float("nan")

    def __post_init__(self):
        for name in ("e_proj", "e_red"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return str(v)


@dataclass
class ErrorReport:
    records: List[ErrorRecord] = field(default_factory=list)

    def sorted(self) -> "ErrorReport":
        order = {"PSD": 0, "SAE": 1}
        return ErrorReport(sorted(self.records, key=lambda r: (r.mu, r.reduced_dim, order.get(r.method, 9), r.method)))

    def to_csv(self, include_timing: bool = False) -> str:
        """CSV text in the fixed column order; ``wall_s`` left blank unless requested."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.sorted().records:
            wall = r.wall_s if include_timing else float("nan")
            w.writerow([r.method, _fmt(r.mu), r.reduced_dim, _fmt(r.e_proj), _fmt(r.e_red), _fmt(r.train_loss), _fmt(wall)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ErrorReport":
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and tuple(rows[0].keys()) != REPORT_COLUMNS:
            raise ValueError(f"unexpected report columns {tuple(rows[0].keys())}")
        recs = []
        for r in rows:
            recs.append(ErrorRecord(
                r["method"], float(r["mu"]), int(r["reduced_dim"]), float(r["e_proj"]), float(r["e_red"]),
                float(r["train_loss"]) if r["train_loss"] else float("nan"),
                float(r["wall_s"]) if r["wall_s"] else float("nan"),
            ))
        return cls(recs)

    def table(self, metric: str) -> Dict[Tuple[float, int], Dict[str, float]]:
        """``{(mu, 2n): {method: value}}`` for ``metric`` in {"e_proj", "e_red"}."""
        out: Dict[Tuple[float, int], Dict[str, float]] = {}
        for r in self.records:
            out.setdefault((r.mu, r.reduced_dim), {})[r.method] = getattr(r, metric)
        return out


def _psd_train_loss(psd: PSD, X) -> float:
    R = X - psd.inverse_transform(psd.transform(X))
    return float(np.sum(R * R) / X.shape[0])


def evaluate(cfg: ExperimentConfig, models: TrainedModels, snapshots: Optional[SnapshotMatrix] = None, threads: int = 1) -> ErrorReport:
    """FOM at every evaluation mu, then e_proj and e_red for PSD and SAE at every 2n."""
    t = cfg.time
    X_train = None if snapshots is None else snapshots.data.T
    with threadpool_limits(1):
        trajs = _map(lambda m: wave_trajectory(float(m), cfg), cfg.evaluation.mu, threads)

    cells = [(i, d) for i in range(len(trajs)) for d in cfg.evaluation.reduced_dims]

    def run_cell(cell):
        i, d = cell
        tr = trajs[i]
        fom = LinearWaveFOM(tr.parameter, cfg.fom.n_tilde, cfg.fom.literal_K)
        recs = []
        for method, model in (("PSD", models.psd[d]), ("SAE", models.sae[d])):
            t0 = time.perf_counter()
            e_proj = compute_projection_error(tr, model)
            e_red = compute_reduction_error(
                tr, model, fom, t.step_size, cfg.evaluation.field_kind,
                t.rom_solver, t.rom_tolerance, t.rom_max_iterations, t.rom_substeps, t.rom_max_substeps,
            )
            if method == "SAE":
                loss = model.loss_history_[-1] if model.loss_history_ else (
                    model.reconstruction_loss(X_train) if X_train is not None else float("nan"))
            else:
                loss = _psd_train_loss(model, X_train) if X_train is not None else float("nan")
            recs.append(ErrorRecord(method, float(tr.parameter), int(d), e_proj, e_red, float(loss), time.perf_counter() - t0))
        return recs

    with threadpool_limits(1):
        results = _map(run_cell, cells, threads)
    return ErrorReport([r for recs in results for r in recs]).sorted()


def run_experiment(cfg: ExperimentConfig, threads: int = 1):
    """Full wave pipeline; returns ``(snapshots, models, report)``."""
    snaps = generate_wave_data(cfg, threads)
    models = train_models(cfg, snaps, threads)
    report = evaluate(cfg, models, snaps, threads)
    return snaps, models, report


def merge_reports(texts: Iterable[str]) -> Tuple[str, str]:
    """Merge report CSVs into ``(summary_csv, long_csv)``.

    The summary has one row per ``(mu, 2n)`` with PSD and SAE columns side by
    side; the long format has one ``(method, mu, reduced_dim, metric, value)``
    row per number, ready for a faceted plot.
    """
    merged = ErrorReport()
    for text in texts:
        merged.records.extend(ErrorReport.from_csv(text).records)
    merged = merged.sorted()
    methods = sorted({r.method for r in merged.records}, key=lambda m: ({"PSD": 0, "SAE": 1}.get(m, 9), m))
    proj, red = merged.table("e_proj"), merged.table("e_red")

    s = io.StringIO()
    w = csv.writer(s, lineterminator="\n")
    w.writerow(["mu", "reduced_dim"] + [f"{m}_{k}" for k in ("e_proj", "e_red") for m in methods])
    for key in sorted(proj):
        row = [_fmt(key[0]), key[1]]
        row += [_fmt(proj[key].get(m, float("nan"))) for m in methods]
        row += [_fmt(red[key].get(m, float("nan"))) for m in methods]
        w.writerow(row)

    l = io.StringIO()
    w = csv.writer(l, lineterminator="\n")
    w.writerow(["method", "mu", "reduced_dim", "metric", "value"])
    for r in merged.records:
        for metric in ("e_proj", "e_red"):
            w.writerow([r.method, _fmt(r.mu), r.reduced_dim, metric, _fmt(getattr(r, metric))])
    return s.getvalue(), l.getvalue()
