"""Binary containers for snapshots and models, plus key-value manifests.

Layout of a container file (all integers little-endian)::

    magic            8 bytes   b"SYMPAE\\x00\\x1a"
    version          uint32
    n_tensors        uint32
    metadata_length  uint64
    metadata         UTF-8 JSON, sorted keys
    shape table      per tensor: name_length uint16, name, ndim uint8, dims uint64 * ndim
    payload_length   uint64
    payload          float64 little-endian, tensors in table order, C order
    checksum         uint32 CRC-32 of every preceding byte

Reading validates the magic, version, table and lengths before any tensor
is materialized, so a damaged file never yields a partial load.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .autoencoder import PSDLayer, SymplecticAutoencoderNetwork
from .exceptions import ContainerError
from .integrators import SnapshotMatrix
from .linear import PSDBasis
from .manifolds import AdamState
from .sympnet import ActivationSympLayer, GradientSympLayer, LinearSympLayer, SympNetBlock

__all__ = [
    "MAGIC",
    "VERSION",
    "atomic_write_bytes",
    "atomic_write_text",
    "write_container",
    "read_container",
    "write_manifest",
    "read_manifest",
    "save_snapshots",
    "load_snapshots",
    "save_model",
    "load_model",
    "save_psd_basis",
    "load_psd_basis",
    "network_architecture",
    "network_from_architecture",
]

MAGIC = b"SYMPAE\x00\x1a"
VERSION = 1
_F64 = np.dtype("<f8")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# raw container


def _encode(tensors: Mapping[str, np.ndarray], metadata: Mapping) -> bytes:
    meta = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<IIQ", VERSION, len(tensors), len(meta)), meta]
    payload = []
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=float)
        key = name.encode("utf-8")
        if len(key) > 0xFFFF or arr.ndim > 0xFF:
            raise ContainerError(f"tensor {name!r} cannot be described in the shape table")
        parts.append(struct.pack("<H", len(key)) + key + struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        payload.append(np.ascontiguousarray(arr, dtype=_F64).tobytes())
    body = b"".join(payload)
    parts.append(struct.pack("<Q", len(body)))
    parts.append(body)
    blob = b"".join(parts)
    return blob + struct.pack("<I", zlib.crc32(blob))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise ContainerError(f"container truncated: need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode(data: bytes) -> Tuple[Dict[str, np.ndarray], dict]:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise ContainerError("bad magic: not a sympae container")
    version, n_tensors, meta_len = r.unpack("<IIQ")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version} (expected {VERSION})")
    try:
        metadata = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"metadata block is corrupt: {exc}") from exc
    table = []
    for _ in range(n_tensors):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8", errors="strict")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}Q")
        table.append((name, tuple(int(s) for s in shape)))
    (payload_len,) = r.unpack("<Q")
    expected = 8 * sum(int(np.prod(s, dtype=np.int64)) for _, s in table)
    if payload_len != expected:
        raise ContainerError(f"payload length {payload_len} disagrees with shape table ({expected} bytes)")
    if len(data) != r.pos + payload_len + 4:
        raise ContainerError(f"file size {len(data)} does not match header ({r.pos + payload_len + 4} bytes)")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise ContainerError("checksum mismatch")
    tensors = {}
    for name, shape in table:
        count = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(r.take(8 * count), dtype=_F64).reshape(shape).astype(float)
    return tensors, metadata


def write_container(path, tensors: Mapping[str, np.ndarray], metadata: Optional[Mapping] = None) -> None:
    """Atomically write ``tensors`` (name -> float array) with JSON ``metadata``."""
    atomic_write_bytes(path, _encode(dict(tensors), dict(metadata or {})))


def read_container(path) -> Tuple[Dict[str, np.ndarray], dict]:
    """Read and validate a container; returns ``(tensors, metadata)``."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ContainerError(f"cannot read {path}: {exc}") from exc
    return _decode(data)


# ---------------------------------------------------------------------------
# manifests


def _fmt_value(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_manifest(path, fields: Mapping) -> None:
    """``key = value`` lines in insertion order; sequences are comma separated."""
    lines = []
    for k, v in fields.items():
        if "\n" in str(k) or "=" in str(k):
            raise ContainerError(f"invalid manifest key {k!r}")
        lines.append(f"{k} = {_fmt_value(v)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path) -> Dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ContainerError(f"malformed manifest line: {line!r}")
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# snapshots


def save_snapshots(path, snapshots: SnapshotMatrix, metadata: Optional[Mapping] = None) -> None:
    meta = {"kind": "snapshots", **dict(metadata or {})}
    write_container(
        path,
        {"data": snapshots.data, "parameters": snapshots.parameters, "times": snapshots.times},
        meta,
    )


def load_snapshots(path) -> Tuple[SnapshotMatrix, dict]:
    tensors, meta = read_container(path)
    if meta.get("kind") != "snapshots":
        raise ContainerError(f"{path} holds {meta.get('kind')!r}, not snapshots")
    missing = {"data", "parameters", "times"} - set(tensors)
    if missing:
        raise ContainerError(f"snapshot container lacks {sorted(missing)}")
    return SnapshotMatrix(tensors["data"], tensors["parameters"], tensors["times"]), meta


# ---------------------------------------------------------------------------
# networks


def _layer_spec(layer) -> dict:
    if isinstance(layer, GradientSympLayer):
        return {"type": "gradient", "mode": layer.mode, "activation": layer.activation.kind}
    if isinstance(layer, ActivationSympLayer):
        return {"type": "activation", "mode": layer.mode, "activation": layer.activation.kind}
    if isinstance(layer, LinearSympLayer):
        return {"type": "linear", "mode": layer.mode}
    raise ContainerError(f"cannot serialize layer of type {type(layer).__name__}")


def network_architecture(network: SymplecticAutoencoderNetwork) -> dict:
    """Ordered stage list describing ``network`` without its weights."""

    def stages(lst):
        out = []
        for st in lst:
            if isinstance(st, SympNetBlock):
                out.append({"type": "block", "N": st.N, "layers": [_layer_spec(l) for l in st.layers]})
            else:
                out.append({"type": "psd", "direction": st.direction})
        return out

    return {"encoder": stages(network.encoder_stages), "decoder": stages(network.decoder_stages)}


def network_from_architecture(arch: Mapping, tensors: Mapping[str, np.ndarray]) -> SymplecticAutoencoderNetwork:
    def need(key):
        if key not in tensors:
            raise ContainerError(f"model container lacks tensor {key!r}")
        return tensors[key]

    def stages(prefix, specs):
        out = []
        for i, spec in enumerate(specs):
            if spec["type"] == "psd":
                out.append(PSDLayer(need(f"{prefix}.{i}.Phi"), spec["direction"]))
                continue
            if spec["type"] != "block":
                raise ContainerError(f"unknown stage type {spec['type']!r}")
            layers = []
            for j, ls in enumerate(spec["layers"]):
                key = f"{prefix}.{i}.{j}"
                if ls["type"] == "gradient":
                    layers.append(GradientSympLayer(need(f"{key}.K"), need(f"{key}.a"), need(f"{key}.b"), ls["activation"], ls["mode"]))
                elif ls["type"] == "activation":
                    layers.append(ActivationSympLayer(need(f"{key}.a"), ls["activation"], ls["mode"]))
                elif ls["type"] == "linear":
                    layers.append(LinearSympLayer(need(f"{key}.S"), ls["mode"]))
                else:
                    raise ContainerError(f"unknown layer type {ls['type']!r}")
            out.append(SympNetBlock(layers, spec["N"]))
        return out

    try:
        return SymplecticAutoencoderNetwork(stages("enc", arch["encoder"]), stages("dec", arch["decoder"]))
    except (KeyError, TypeError) as exc:
        raise ContainerError(f"malformed architecture description: {exc}") from exc


def save_model(
    path,
    network: SymplecticAutoencoderNetwork,
    optimizer_states: Optional[Mapping[str, AdamState]] = None,
    metadata: Optional[Mapping] = None,
) -> None:
    """Write weights, architecture and (optionally) the Adam caches for resumption."""
    tensors = {k: v for k, v in network.parameters().items()}
    opt_meta = {}
    for key, st in (optimizer_states or {}).items():
        opt_meta[key] = {
            "eta": st.eta, "beta1": st.beta1, "beta2": st.beta2, "delta": st.delta,
            "step_count": st.step_count, "has_moments": st.first_moment is not None,
        }
        if st.first_moment is not None:
            tensors[f"opt.{key}.first"] = st.first_moment
            tensors[f"opt.{key}.second"] = st.second_moment
    meta = {
        "kind": "sae-model",
        "architecture": network_architecture(network),
        "optimizer": opt_meta,
        **dict(metadata or {}),
    }
    write_container(path, tensors, meta)


def load_model(path) -> Tuple[SymplecticAutoencoderNetwork, Dict[str, AdamState], dict]:
    tensors, meta = read_container(path)
    if meta.get("kind") != "sae-model":
        raise ContainerError(f"{path} holds {meta.get('kind')!r}, not a model")
    network = network_from_architecture(meta["architecture"], tensors)
    states = {}
    for key, m in meta.get("optimizer", {}).items():
        first = second = None
        if m["has_moments"]:
            first, second = tensors[f"opt.{key}.first"], tensors[f"opt.{key}.second"]
        states[key] = AdamState(m["eta"], m["beta1"], m["beta2"], m["delta"], int(m["step_count"]), first, second)
    return network, states, meta


def save_psd_basis(path, basis: PSDBasis, metadata: Optional[Mapping] = None) -> None:
    write_container(path, {"Phi": basis.Phi}, {"kind": "psd-basis", **dict(metadata or {})})


def load_psd_basis(path) -> Tuple[PSDBasis, dict]:
    tensors, meta = read_container(path)
    if meta.get("kind") != "psd-basis" or "Phi" not in tensors:
        raise ContainerError(f"{path} is not a PSD basis container")
    return PSDBasis(tensors["Phi"]), meta
