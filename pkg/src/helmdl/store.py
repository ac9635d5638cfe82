"""Bit-exact persistence for datasets, checkpoints, and manifests.

Dataset files: 8-byte magic ``HDLD0001`` then, per record, a little-endian
u64 index followed by the c, mask, u_real, u_imag grids as contiguous
float64.  The manifest travels in a JSON sidecar (``<file>.manifest.json``)
that also carries a SHA-256 of the binary payload, verified on read.

Checkpoint files: 8-byte magic ``HDCK0001``, a u32 header length, a JSON
header (format version, architecture, schedule, training log, seeds,
tensor table), the float64 tensor payload, and a trailing SHA-256 over
everything before it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diffusion import Checkpoint
from .errors import CorruptCheckpointError, CorruptDataError, UnsupportedFormatError
from .nn import DenoiserConfig

DATASET_MAGIC = b"HDLD0001"
CHECKPOINT_MAGIC = b"HDCK0001"
FORMAT_VERSION = 1


@dataclass
class DatasetManifest:
    frequency_hz: float
    grid_shape: tuple[int, ...]
    dx: float
    grf: dict
    normalization: dict
    splits: dict
    root_seed: int
    record_count: int
    source: dict
    encoding_levels: int
    format_version: int = FORMAT_VERSION
    sha256: str = ""

    def validate(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise UnsupportedFormatError(f"manifest format_version {self.format_version}")
        if self.record_count != sum(self.splits.values()):
            raise CorruptDataError(
                f"record count {self.record_count} != sum of splits {self.splits}"
            )


@dataclass
class Dataset:
    c: np.ndarray
    mask: np.ndarray
    u: np.ndarray
    manifest: DatasetManifest
    indices: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.indices is None:
            self.indices = np.arange(self.c.shape[0], dtype=np.uint64)


def split_slices(manifest: DatasetManifest) -> dict[str, slice]:
    """Contiguous train/val/test index ranges in manifest order."""
    out, lo = {}, 0
    for name in ("train", "val", "test"):
        n = manifest.splits[name]
        out[name] = slice(lo, lo + n)
        lo += n
    return out


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest.json")


def _le64(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype="<f8")


def write_dataset(ds: Dataset, path) -> None:
    path = Path(path)
    n = ds.c.shape[0]
    if not (ds.mask.shape == ds.c.shape and ds.u.shape == ds.c.shape):
        raise ValueError("records must be homogeneous in shape")
    h = hashlib.sha256()
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        h.update(DATASET_MAGIC)
        for i in range(n):
            chunk = ds.indices[i : i + 1].astype("<u8").tobytes()
            chunk += _le64(ds.c[i]).tobytes()
            chunk += _le64(ds.mask[i]).tobytes()
            chunk += _le64(ds.u[i].real).tobytes()
            chunk += _le64(ds.u[i].imag).tobytes()
            fh.write(chunk)
            h.update(chunk)
    man = ds.manifest
    man.sha256 = h.hexdigest()
    man.record_count = n
    with open(manifest_path(path), "w", encoding="utf-8") as fh:
        json.dump(asdict(man), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset(path) -> Dataset:
    path = Path(path)
    mpath = manifest_path(path)
    if not mpath.exists():
        raise CorruptDataError(f"missing manifest sidecar {mpath}")
    with open(mpath, encoding="utf-8") as fh:
        raw = json.load(fh)
    raw["grid_shape"] = tuple(raw["grid_shape"])
    man = DatasetManifest(**raw)
    man.validate()

    blob = path.read_bytes()
    if blob[:8] != DATASET_MAGIC:
        raise UnsupportedFormatError(f"bad magic {blob[:8]!r} in {path}")
    if man.sha256 and hashlib.sha256(blob).hexdigest() != man.sha256:
        raise CorruptDataError(f"checksum mismatch in {path}")
    grid_points = int(np.prod(man.grid_shape))
    rec_bytes = 8 + 4 * grid_points * 8
    n = man.record_count
    if len(blob) != 8 + n * rec_bytes:
        raise CorruptDataError(
            f"file size {len(blob)} != expected {8 + n * rec_bytes} for {n} records"
        )
    shape = (n,) + man.grid_shape
    c = np.empty(shape)
    mask = np.empty(shape)
    u = np.empty(shape, dtype=complex)
    indices = np.empty(n, dtype=np.uint64)
    for i in range(n):
        off = 8 + i * rec_bytes
        indices[i] = np.frombuffer(blob, "<u8", count=1, offset=off)[0]
        grids = np.frombuffer(blob, "<f8", count=4 * grid_points, offset=off + 8)
        grids = grids.reshape((4,) + man.grid_shape)
        c[i], mask[i] = grids[0], grids[1]
        u[i] = grids[2] + 1j * grids[3]
    return Dataset(c=c, mask=mask, u=u, manifest=man, indices=indices)


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    tensors = []
    payload = bytearray()
    for group, params in (("params", ckpt.params), ("ema", ckpt.ema)):
        for name in sorted(params):
            arr = _le64(params[name])
            tensors.append({"group": group, "name": name, "shape": list(arr.shape)})
            payload += arr.tobytes()
    header = {
        "format_version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "config": asdict(ckpt.config),
        "ema_decay": ckpt.ema_decay,
        "schedule_kind": ckpt.schedule_kind,
        "t_steps": ckpt.t_steps,
        "train_log": ckpt.train_log,
        "seeds": ckpt.seeds,
        "tensors": tensors,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = (
        CHECKPOINT_MAGIC
        + np.uint32(len(header_bytes)).astype("<u4").tobytes()
        + header_bytes
        + bytes(payload)
    )
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(hashlib.sha256(body).digest())


def read_checkpoint(path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise UnsupportedFormatError(f"bad magic {blob[:8]!r} in {path}")
    if len(blob) < 44:
        raise CorruptCheckpointError(f"truncated checkpoint {path}")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptCheckpointError(f"checksum mismatch in {path}")
    header_len = int(np.frombuffer(body, "<u4", count=1, offset=8)[0])
    header = json.loads(body[12 : 12 + header_len].decode("utf-8"))
    if header["format_version"] != FORMAT_VERSION:
        raise UnsupportedFormatError(f"checkpoint format_version {header['format_version']}")

    groups: dict[str, dict[str, np.ndarray]] = {"params": {}, "ema": {}}
    off = 12 + header_len
    for entry in header["tensors"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        arr = np.frombuffer(body, "<f8", count=size, offset=off).reshape(entry["shape"]).copy()
        groups[entry["group"]][entry["name"]] = arr
        off += size * 8
    if off != len(body):
        raise CorruptCheckpointError(f"payload length mismatch in {path}")
    return Checkpoint(
        kind=header["kind"],
        config=DenoiserConfig(**header["config"]),
        params=groups["params"],
        ema=groups["ema"],
        ema_decay=header["ema_decay"],
        schedule_kind=header["schedule_kind"],
        t_steps=header["t_steps"],
        train_log=header["train_log"],
        seeds=header["seeds"],
    )
