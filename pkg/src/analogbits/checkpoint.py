"""Binary checkpoint format for denoiser weights.

Layout (all integers little-endian):

    magic            8 bytes  b"ANLGBITS"
    version          u32      currently 1
    n_dims           u32      number of layer boundary widths
    dims             u32 * n_dims   input, hidden..., final widths
    head_kind        u32      0 = linear, 1 = softmax
    positions        u32
    n_time_features  u32
    output_map       u32      0 = identity, 1 = scaled_sigmoid, 2 = scaled_softmax
    scale            f64      soft-bit magnitude
    codebook_rows    u32      0 for the linear head
    codebook_cols    u32
    codec_hash       32 bytes sha256 fingerprint of the codec
    n_arrays         u32
    arrays           n_arrays records:
                       name_len  u16
                       name      utf-8 bytes
                       count     u64
                       data      f32 * count, little-endian, C order

Weight arrays appear in declaration order (w0, b0, w1, ...); the averaged
shadow copy, when present, follows with an ``ema/`` name prefix; the
codebook, when present, is stored first under the name ``codebook``.
Values are stored as float32 and widened to float64 on load, so
save -> load -> save reproduces the file byte for byte.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .codec import CodecSpec
from .errors import ConfigError, InvariantViolation
from .mlp import HEADS, OUTPUT_MAPS, MlpConfig

MAGIC = b"ANLGBITS"
VERSION = 1


def codec_fingerprint(spec: CodecSpec) -> bytes:
    """sha256 over a canonical text rendering of the codec parameters."""
    parts = [spec.kind, str(spec.vocab_size), repr(float(spec.scale))]
    if spec.permutation is not None:
        parts.append(",".join(str(v) for v in spec.permutation))
    return hashlib.sha256("|".join(parts).encode("ascii")).digest()


@dataclass
class CheckpointBundle:
    cfg: MlpConfig
    params: dict[str, np.ndarray]
    ema_params: dict[str, np.ndarray] | None
    codec_hash: bytes


def _pack_array(name: str, values: np.ndarray) -> bytes:
    raw = np.ascontiguousarray(values, dtype="<f4").tobytes()
    encoded = name.encode("utf-8")
    return struct.pack("<H", len(encoded)) + encoded + struct.pack("<Q", values.size) + raw


def save(path, cfg: MlpConfig, params: dict[str, np.ndarray],
         codec_hash: bytes, ema_params: dict[str, np.ndarray] | None = None) -> None:
    if len(codec_hash) != 32:
        raise InvariantViolation("codec hash must be 32 bytes")
    dims = cfg.layer_dims
    head = 0 if cfg.head == "linear" else 1
    out_map = OUTPUT_MAPS.index(cfg.output_map)
    cb = cfg.codebook_array() if cfg.codebook is not None else np.zeros((0, 0))
    blob = [MAGIC, struct.pack("<II", VERSION, len(dims))]
    blob.append(struct.pack(f"<{len(dims)}I", *dims))
    blob.append(struct.pack("<IIII", head, cfg.positions, cfg.n_time_features, out_map))
    blob.append(struct.pack("<d", cfg.scale))
    blob.append(struct.pack("<II", cb.shape[0], cb.shape[1] if cb.size else 0))
    blob.append(codec_hash)
    arrays: list[tuple[str, np.ndarray]] = []
    if cb.size:
        arrays.append(("codebook", cb))
    arrays.extend(params.items())
    if ema_params is not None:
        arrays.extend((f"ema/{k}", v) for k, v in ema_params.items())
    blob.append(struct.pack("<I", len(arrays)))
    blob.extend(_pack_array(name, values) for name, values in arrays)
    with open(path, "wb") as fh:
        fh.write(b"".join(blob))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise InvariantViolation("checkpoint truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load(path) -> CheckpointBundle:
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(8) != MAGIC:
        raise InvariantViolation("not a checkpoint file (bad magic)")
    version, n_dims = r.unpack("<II")
    if version != VERSION:
        raise InvariantViolation(f"unsupported checkpoint version {version}")
    dims = r.unpack(f"<{n_dims}I")
    head, positions, n_time_features, out_map = r.unpack("<IIII")
    (scale,) = r.unpack("<d")
    cb_rows, cb_cols = r.unpack("<II")
    codec_hash = r.take(32)
    (n_arrays,) = r.unpack("<I")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_arrays):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (count,) = r.unpack("<Q")
        flat = np.frombuffer(r.take(4 * count), dtype="<f4")
        arrays[name] = flat.astype(np.float64)
    if r.pos != len(r.data):
        raise InvariantViolation("checkpoint has trailing bytes")

    if head not in (0, 1) or out_map >= len(OUTPUT_MAPS):
        raise InvariantViolation("checkpoint names an unknown head or output map")
    codebook = None
    if cb_rows:
        if "codebook" not in arrays:
            raise InvariantViolation("checkpoint header promises a codebook but none stored")
        codebook = tuple(
            tuple(row) for row in arrays.pop("codebook").reshape(cb_rows, cb_cols)
        )
    try:
        cfg = MlpConfig(
            n_features=(dims[0] - n_time_features) // 2,
            hidden=tuple(dims[1:-1]),
            n_time_features=n_time_features,
            head=HEADS[head],
            positions=positions,
            codebook=codebook,
            output_map=OUTPUT_MAPS[out_map],
            scale=scale,
        )
    except ConfigError as exc:
        raise InvariantViolation(f"checkpoint header is not a valid model: {exc}") from exc
    if cfg.layer_dims != dims:
        raise InvariantViolation(f"checkpoint widths {dims} are internally inconsistent")

    params: dict[str, np.ndarray] = {}
    ema: dict[str, np.ndarray] = {}
    layer_dims = list(zip(dims[:-1], dims[1:]))
    for name, flat in arrays.items():
        target, key = (ema, name[4:]) if name.startswith("ema/") else (params, name)
        kind, idx = key[0], int(key[1:])
        if kind not in ("w", "b") or idx >= len(layer_dims):
            raise InvariantViolation(f"unexpected array {name!r} in checkpoint")
        shape = layer_dims[idx] if kind == "w" else (layer_dims[idx][1],)
        if flat.size != int(np.prod(shape)):
            raise InvariantViolation(f"array {name!r} has wrong length")
        target[key] = flat.reshape(shape)
    expected = {f"{k}{i}" for i in range(len(layer_dims)) for k in "wb"}
    if set(params) != expected or (ema and set(ema) != expected):
        raise InvariantViolation("checkpoint is missing weight arrays")
    return CheckpointBundle(cfg, params, ema or None, codec_hash)
