"""On-disk embedding format (VEMB), dataset manifests, frame sampling, and
the synthetic dataset generator.

VEMB layout (little-endian): magic 56 45 4D 42, u16 version=1, u16 flags=0,
u8 dtype (0=float32, 1=float64), u8 rank (1 or 2), rank x u32 extents,
row-major payload, u32 CRC-32 (IEEE) of the payload.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    ChecksumMismatch,
    ConfigInvalid,
    DegenerateData,
    NormUnderflow,
    TruncatedFile,
    UnsupportedVersion,
)

MAGIC = b"VEMB"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def l2_normalize(v, min_norm=1e-12):
    """Scale vector(s) to unit L2 norm; rows are normalized independently."""
    arr = np.asarray(v, dtype=np.float64 if np.asarray(v).dtype != np.float32 else np.float32)
    if arr.ndim == 1:
        n = math.sqrt(float(arr @ arr))
        if n < min_norm:
            raise NormUnderflow("vector norm below 1e-12")
        return arr / n
    norms = np.sqrt((arr * arr).sum(axis=-1, keepdims=True))
    if np.any(norms < min_norm):
        raise NormUnderflow("row norm below 1e-12")
    return arr / norms


def sample_frames(n_frames, target):
    """Endpoint-inclusive uniform indices: idx_i = round_half_up(i*(N-1)/(T-1)).

    Duplicates appear when n_frames < target (index repetition upsampling).
    """
    if n_frames < 1 or target < 1:
        raise ConfigInvalid("n_frames and target must be >= 1")
    if target == 1:
        return [0]
    return [
        int(math.floor(i * (n_frames - 1) / (target - 1) + 0.5))
        for i in range(target)
    ]


# ---------------------------------------------------------------------------
# VEMB container


def vemb_bytes(matrix):
    """Serialize a rank-1 or rank-2 float array to a VEMB blob."""
    arr = np.ascontiguousarray(matrix)
    if arr.dtype not in _DTYPE_CODES:
        raise ConfigInvalid(f"unsupported dtype {arr.dtype}")
    if arr.ndim not in (1, 2):
        raise ConfigInvalid(f"unsupported rank {arr.ndim}")
    payload = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
    header = MAGIC + struct.pack("<HHBB", 1, 0, _DTYPE_CODES[arr.dtype], arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    crc = struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    return header + payload + crc


def write_embeddings(path, matrix):
    """Write a rank-1 or rank-2 float array atomically (temp file + rename)."""
    blob = vemb_bytes(matrix)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(blob)
    os.replace(tmp, path)


def read_embeddings_from(buf):
    """Parse a VEMB blob from a bytes-like object; returns (array, bytes_used)."""
    if len(buf) < 4:
        raise TruncatedFile("shorter than magic")
    if bytes(buf[:4]) != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {bytes(buf[:4])!r}")
    if len(buf) < 10:
        raise TruncatedFile("header incomplete")
    version, flags, dtype_code, rank = struct.unpack_from("<HHBB", buf, 4)
    if version != 1:
        raise UnsupportedVersion(f"version {version}")
    if dtype_code not in _DTYPES or rank not in (1, 2):
        raise UnsupportedVersion(f"dtype {dtype_code}, rank {rank}")
    off = 10
    if len(buf) < off + 4 * rank:
        raise TruncatedFile("extents incomplete")
    extents = struct.unpack_from(f"<{rank}I", buf, off)
    off += 4 * rank
    dt = _DTYPES[dtype_code]
    nbytes = dt.itemsize * int(np.prod(extents))
    if len(buf) < off + nbytes + 4:
        raise TruncatedFile("payload incomplete")
    payload = bytes(buf[off : off + nbytes])
    (crc_stored,) = struct.unpack_from("<I", buf, off + nbytes)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc_stored:
        raise ChecksumMismatch("payload CRC-32 mismatch")
    arr = np.frombuffer(payload, dtype=dt).reshape(extents)
    return arr.astype(dt.newbyteorder("=")), off + nbytes + 4


def read_embeddings(path):
    with open(path, "rb") as f:
        buf = f.read()
    arr, _ = read_embeddings_from(buf)
    return arr


# ---------------------------------------------------------------------------
# dataset model


@dataclass
class FrameSequence:
    video_id: str
    frames: np.ndarray  # T x D
    label: int | None = None

    def normalized(self):
        return FrameSequence(self.video_id, l2_normalize(self.frames), self.label)

    def resampled(self, target):
        idx = sample_frames(self.frames.shape[0], target)
        return FrameSequence(self.video_id, self.frames[idx], self.label)


@dataclass
class ClassPrototypes:
    names: list
    vectors: np.ndarray  # C x D, unit rows

    def __post_init__(self):
        if len(self.names) != len(set(self.names)):
            raise ConfigInvalid("class names must be unique")
        if len(self.names) < 2:
            raise ConfigInvalid("need at least 2 classes")


@dataclass
class ManifestRecord:
    video_id: str
    path: str
    label: int
    frames: int


@dataclass
class DatasetManifest:
    dim: int
    class_names: list
    records: list = field(default_factory=list)
    seed: int | None = None
    task: str | None = None

    @property
    def num_classes(self):
        return len(self.class_names)

    def save(self, path):
        header = {
            "dim": self.dim,
            "class_names": self.class_names,
            "seed": self.seed,
            "task": self.task,
        }
        tmp = f"{path}.tmp"
        with open(tmp, "w") as f:
            f.write(json.dumps(header, sort_keys=True) + "\n")
            for r in self.records:
                f.write(
                    json.dumps(
                        {
                            "video_id": r.video_id,
                            "path": r.path,
                            "label": r.label,
                            "frames": r.frames,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
        os.replace(tmp, path)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            lines = [ln for ln in f.read().splitlines() if ln.strip()]
        if not lines:
            raise TruncatedFile("empty manifest")
        header = json.loads(lines[0])
        m = cls(
            dim=header["dim"],
            class_names=header["class_names"],
            seed=header.get("seed"),
            task=header.get("task"),
        )
        for ln in lines[1:]:
            rec = json.loads(ln)
            m.records.append(
                ManifestRecord(rec["video_id"], rec["path"], rec["label"], rec["frames"])
            )
        return m

    def load_sequence(self, record, base_dir):
        frames = read_embeddings(os.path.join(base_dir, record.path))
        if frames.ndim != 2 or frames.shape != (record.frames, self.dim):
            raise ConfigInvalid(
                f"{record.video_id}: file shape {frames.shape} does not match manifest"
            )
        return FrameSequence(record.video_id, frames, record.label)

    def load_all(self, base_dir):
        return [self.load_sequence(r, base_dir) for r in self.records]


def load_prototypes(data_dir):
    manifest = DatasetManifest.load(os.path.join(data_dir, "manifest.jsonl"))
    vectors = read_embeddings(os.path.join(data_dir, "prototypes.vemb"))
    return ClassPrototypes(manifest.class_names, vectors)


# ---------------------------------------------------------------------------
# synthetic generation


@dataclass
class SynthConfig:
    classes: int
    videos_per_class: int
    frames: int
    dim: int
    sigma: float = 0.05
    rho: float = 0.5
    task: str = "anchor"  # anchor | order
    seed: int = 0

    def validate(self):
        if min(self.classes, self.videos_per_class, self.frames, self.dim) < 1:
            raise ConfigInvalid("all extents must be positive")
        if self.classes < 2:
            raise ConfigInvalid("need at least 2 classes")
        if not 0.0 < self.sigma < 1.0:
            raise ConfigInvalid("sigma must lie in (0, 1)")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigInvalid("rho must lie in [0, 1)")
        if self.task not in ("anchor", "order"):
            raise ConfigInvalid(f"unknown task {self.task!r}")
        if self.task == "order" and self.classes % 2 != 0:
            raise ConfigInvalid("order task needs an even class count")


def stream_rng(seed, stream=""):
    """Counter-based Philox generator keyed by (seed, blake2s(stream))."""
    h = int.from_bytes(hashlib.blake2s(stream.encode(), digest_size=8).digest(), "little")
    return np.random.Generator(np.random.Philox(key=((seed & 0xFFFFFFFFFFFFFFFF) << 64) | h))


def _orthonormal_rows(rng, c, d):
    """Random unit rows, Gram-Schmidt orthogonalized when d >= c."""
    raw = rng.standard_normal((c, d))
    if d < c:
        return l2_normalize(raw)
    out = np.zeros((c, d))
    for i in range(c):
        v = raw[i].copy()
        for j in range(i):
            v -= (v @ out[j]) * out[j]
        out[i] = l2_normalize(v)
    return out


def _ar1_noise(rng, t, d, rho):
    w = np.zeros((t, d))
    w[0] = rng.standard_normal(d)
    scale = math.sqrt(1.0 - rho * rho)
    for i in range(1, t):
        w[i] = rho * w[i - 1] + scale * rng.standard_normal(d)
    return w


def generate_synthetic(config, out_dir):
    """Write a synthetic dataset (manifest + per-video VEMB files + prototypes).

    anchor task: frames drift around a fixed class anchor with AR(1) noise.
    order task: class pairs (2c, 2c+1) traverse the same two anchors in
    opposite directions, so frame multisets match across the pair.
    """
    config.validate()
    os.makedirs(os.path.join(out_dir, "videos"), exist_ok=True)

    proto_rng = stream_rng(config.seed, "prototypes")
    protos = _orthonormal_rows(proto_rng, config.classes, config.dim)
    names = [f"class_{c:03d}" for c in range(config.classes)]

    if config.task == "order":
        anchor_rng = stream_rng(config.seed, "anchors")
        pair_anchors = _orthonormal_rows(anchor_rng, config.classes, config.dim)

    manifest = DatasetManifest(
        dim=config.dim,
        class_names=names,
        seed=config.seed,
        task=config.task,
    )

    t = config.frames
    alphas = np.linspace(0.0, 1.0, t)[:, None] if t > 1 else np.array([[0.5]])
    for c in range(config.classes):
        for v in range(config.videos_per_class):
            vid = f"{names[c]}_v{v:04d}"
            rng = stream_rng(config.seed, f"video/{vid}")
            noise = config.sigma * _ar1_noise(rng, t, config.dim, config.rho)
            if config.task == "anchor":
                base = protos[c][None, :] + noise
            else:
                pair = c // 2
                p, q = pair_anchors[2 * pair], pair_anchors[2 * pair + 1]
                path_ = (1.0 - alphas) * p[None, :] + alphas * q[None, :]
                if c % 2 == 1:
                    path_ = path_[::-1]
                base = path_ + noise
            frames = l2_normalize(base).astype(np.float32)
            rel = os.path.join("videos", f"{vid}.vemb")
            write_embeddings(os.path.join(out_dir, rel), frames)
            manifest.records.append(ManifestRecord(vid, rel, c, t))

    if config.task == "anchor" and config.sigma <= 0.1:
        _check_separability(manifest, protos, out_dir)

    write_embeddings(os.path.join(out_dir, "prototypes.vemb"), protos.astype(np.float32))
    manifest.save(os.path.join(out_dir, "manifest.jsonl"))
    return manifest, ClassPrototypes(names, protos.astype(np.float32))


def _check_separability(manifest, protos, out_dir):
    """Frame-wise nearest-prototype classification must recover >= 99% labels."""
    total = correct = 0
    for rec in manifest.records:
        frames = read_embeddings(os.path.join(out_dir, rec.path))
        pred = (frames @ protos.T).argmax(axis=1)
        correct += int((pred == rec.label).sum())
        total += frames.shape[0]
    if correct < 0.99 * total:
        raise DegenerateData(
            f"anchor data not separable: {correct}/{total} frames recovered"
        )
