"""Temporal fusion heads: mid-frame, max-pool, majority-vote, LSTM, and a
small pre-layer-norm transformer encoder.

All embedding-valued heads expect frame rows that are already unit-norm
(the loaders normalize on entry) and emit a unit-norm joint-space vector.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn
from .data import l2_normalize, read_embeddings_from, vemb_bytes
from .errors import ConfigInvalid, TruncatedFile
from .tensor import Tensor

EMBEDDING_KINDS = ("mid_frame", "max_pool", "lstm", "transformer")
ALL_KINDS = EMBEDDING_KINDS + ("majority_vote",)
TRAINABLE_KINDS = ("lstm", "transformer")


@dataclass
class HeadSpec:
    kind: str
    d_in: int
    d_out: int | None = None
    hidden: int | None = None  # lstm
    d_model: int | None = None  # transformer
    layers: int = 2
    heads: int = 4
    ffn: int | None = None
    pooling: str = "cls"  # cls | mean

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigInvalid(f"unknown head kind {self.kind!r}")
        if self.d_in < 1:
            raise ConfigInvalid("d_in must be positive")
        if self.d_out is None:
            self.d_out = self.d_in
        if self.hidden is None:
            self.hidden = self.d_in
        if self.d_model is None:
            self.d_model = self.d_in
        if self.ffn is None:
            self.ffn = 4 * self.d_model
        if min(self.d_out, self.hidden, self.d_model, self.heads, self.ffn) < 1:
            raise ConfigInvalid("all extents must be positive")
        if self.layers < 0:
            raise ConfigInvalid("layers must be >= 0")
        if self.kind == "transformer" and self.d_model % self.heads != 0:
            raise ConfigInvalid(
                f"d_model {self.d_model} not divisible by {self.heads} heads"
            )
        if self.pooling not in ("cls", "mean"):
            raise ConfigInvalid(f"unknown pooling {self.pooling!r}")

    def to_dict(self):
        return {
            "kind": self.kind,
            "d_in": self.d_in,
            "d_out": self.d_out,
            "hidden": self.hidden,
            "d_model": self.d_model,
            "layers": self.layers,
            "heads": self.heads,
            "ffn": self.ffn,
            "pooling": self.pooling,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class HeadParams:
    spec: HeadSpec
    tensors: dict = field(default_factory=dict)

    def fingerprint(self):
        if not self.tensors:
            return f"baseline:{self.spec.kind}"
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]

    # --- serialization: JSON header + one VEMB section per tensor -----------

    def to_bytes(self):
        names = list(self.tensors.keys())
        header = json.dumps(
            {"spec": self.spec.to_dict(), "tensors": names}, sort_keys=True
        ).encode()
        out = io.BytesIO()
        out.write(b"VEMH" + struct.pack("<HI", 1, len(header)) + header)
        for name in names:
            out.write(vemb_bytes(self.tensors[name].data))
        return out.getvalue()

    @classmethod
    def from_bytes(cls, blob):
        if blob[:4] != b"VEMH":
            from .errors import BadMagic

            raise BadMagic("not a head-parameter container")
        version, hlen = struct.unpack_from("<HI", blob, 4)
        if version != 1:
            from .errors import UnsupportedVersion

            raise UnsupportedVersion(f"container version {version}")
        if len(blob) < 10 + hlen:
            raise TruncatedFile("container header incomplete")
        header = json.loads(blob[10 : 10 + hlen])
        spec = HeadSpec.from_dict(header["spec"])
        tensors = {}
        off = 10 + hlen
        for name in header["tensors"]:
            arr, used = read_embeddings_from(blob[off:])
            tensors[name] = Tensor(arr, requires_grad=True)
            off += used
        return cls(spec, tensors)

    def save(self, path):
        tmp = f"{path}.tmp"
        with open(tmp, "wb") as f:
            f.write(self.to_bytes())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


@dataclass
class VideoEmbedding:
    video_id: str
    vector: np.ndarray
    head: str


# ---------------------------------------------------------------------------
# initialization


def _xavier(rng, fan_in, fan_out, shape):
    b = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-b, b, size=shape)


def init_params(spec, seed, dtype=np.float32):
    """Xavier-uniform weights, zero biases (LSTM forget bias = 1), seeded."""
    from .data import stream_rng

    rng = stream_rng(seed, f"init/{spec.kind}")
    t = {}

    def param(name, arr):
        t[name] = Tensor(np.asarray(arr, dtype=dtype), requires_grad=True)

    if spec.kind == "lstm":
        d, h = spec.d_in, spec.hidden
        for gate in "ifgo":
            param(f"W_{gate}", _xavier(rng, d, h, (d, h)))
            param(f"U_{gate}", _xavier(rng, h, h, (h, h)))
            param(f"b_{gate}", np.ones((1, h)) if gate == "f" else np.zeros((1, h)))
        param("W_out", _xavier(rng, h, spec.d_out, (h, spec.d_out)))
        param("b_out", np.zeros((1, spec.d_out)))
    elif spec.kind == "transformer":
        d = spec.d_model
        param("cls", _xavier(rng, d, d, (1, d)))
        if spec.d_in != d:
            param("W_in", _xavier(rng, spec.d_in, d, (spec.d_in, d)))
            param("b_in", np.zeros((1, d)))
        for layer in range(spec.layers):
            pre = f"l{layer}_"
            param(pre + "ln1_g", np.ones((1, d)))
            param(pre + "ln1_b", np.zeros((1, d)))
            for name in ("wq", "wk", "wv", "wo"):
                param(pre + name, _xavier(rng, d, d, (d, d)))
            param(pre + "ln2_g", np.ones((1, d)))
            param(pre + "ln2_b", np.zeros((1, d)))
            param(pre + "ffn_w1", _xavier(rng, d, spec.ffn, (d, spec.ffn)))
            param(pre + "ffn_b1", np.zeros((1, spec.ffn)))
            param(pre + "ffn_w2", _xavier(rng, spec.ffn, d, (spec.ffn, d)))
            param(pre + "ffn_b2", np.zeros((1, d)))
        param("W_out", _xavier(rng, d, spec.d_out, (d, spec.d_out)))
        param("b_out", np.zeros((1, spec.d_out)))
    elif spec.kind not in ALL_KINDS:
        raise ConfigInvalid(f"unknown head kind {spec.kind!r}")
    return HeadParams(spec, t)


# ---------------------------------------------------------------------------
# parameter-free heads


def fuse_mid_frame(seq):
    mid = (seq.frames.shape[0] - 1) // 2
    return VideoEmbedding(seq.video_id, l2_normalize(seq.frames[mid]), "mid_frame")


def fuse_max_pool(seq):
    pooled = seq.frames.max(axis=0)
    return VideoEmbedding(seq.video_id, l2_normalize(pooled), "max_pool")


def classify_majority_vote(seq, protos):
    """Per-frame nearest prototype, then modal class.

    Ties break first by largest summed score over frames, then lowest index.
    """
    scores = seq.frames @ protos.vectors.T  # T x C
    votes = scores.argmax(axis=1)
    counts = Counter(votes.tolist())
    top = max(counts.values())
    tied = sorted(c for c, n in counts.items() if n == top)
    if len(tied) == 1:
        return tied[0]
    sums = scores.sum(axis=0)
    best = max(tied, key=lambda c: (sums[c], -c))
    return int(best)


# ---------------------------------------------------------------------------
# differentiable heads


def lstm_forward(x, params):
    """x: (T, D) tensor of unit-norm frames -> (1, d_out) unit-norm tensor."""
    spec = params.spec
    p = params.tensors
    t_steps = x.shape[0]
    zero = Tensor(np.zeros((1, spec.hidden), dtype=x.dtype))
    h, c = zero, zero
    for t in range(t_steps):
        xt = tn.row(x, t)
        i = tn.sigmoid(_gate(xt, h, p, "i"))
        f = tn.sigmoid(_gate(xt, h, p, "f"))
        g = tn.tanh(_gate(xt, h, p, "g"))
        o = tn.sigmoid(_gate(xt, h, p, "o"))
        c = tn.add(tn.mul(f, c), tn.mul(i, g))
        h = tn.mul(o, tn.tanh(c))
    return tn.l2norm_rows(tn.add(tn.matmul(h, p["W_out"]), p["b_out"]))


def _gate(xt, h, p, name):
    return tn.add(
        tn.add(tn.matmul(xt, p[f"W_{name}"]), tn.matmul(h, p[f"U_{name}"])),
        p[f"b_{name}"],
    )


def sinusoidal_positions(length, d_model, dtype=np.float32):
    pos = np.arange(length)[:, None].astype(np.float64)
    half = (d_model + 1) // 2
    freqs = np.exp(-math.log(10000.0) * (2 * np.arange(half)) / d_model)
    ang = pos * freqs[None, :]
    pe = np.zeros((length, 2 * half))
    pe[:, 0::2] = np.sin(ang)
    pe[:, 1::2] = np.cos(ang)
    return pe[:, :d_model].astype(dtype)


def transformer_forward(x, params):
    """Pre-layer-norm encoder with a learned CLS token and sinusoidal positions."""
    spec = params.spec
    p = params.tensors
    h = x
    if "W_in" in p:
        h = tn.add(tn.matmul(h, p["W_in"]), p["b_in"])
    h = tn.concat_rows([p["cls"], h])
    pe = Tensor(sinusoidal_positions(h.shape[0], spec.d_model, dtype=x.dtype))
    h = tn.add(h, pe)
    dk = spec.d_model // spec.heads
    inv_sqrt_dk = 1.0 / math.sqrt(dk)
    for layer in range(spec.layers):
        pre = f"l{layer}_"
        a = tn.layer_norm_rows(h, p[pre + "ln1_g"], p[pre + "ln1_b"])
        q = tn.matmul(a, p[pre + "wq"])
        k = tn.matmul(a, p[pre + "wk"])
        v = tn.matmul(a, p[pre + "wv"])
        head_outs = []
        for i in range(spec.heads):
            j0, j1 = i * dk, (i + 1) * dk
            qi = tn.col_slice(q, j0, j1)
            ki = tn.col_slice(k, j0, j1)
            vi = tn.col_slice(v, j0, j1)
            attn = tn.softmax_rows(tn.scale(tn.matmul(qi, tn.transpose(ki)), inv_sqrt_dk))
            head_outs.append(tn.matmul(attn, vi))
        h = tn.add(h, tn.matmul(tn.concat_cols(head_outs), p[pre + "wo"]))
        b = tn.layer_norm_rows(h, p[pre + "ln2_g"], p[pre + "ln2_b"])
        ff = tn.relu(tn.add(tn.matmul(b, p[pre + "ffn_w1"]), p[pre + "ffn_b1"]))
        ff = tn.add(tn.matmul(ff, p[pre + "ffn_w2"]), p[pre + "ffn_b2"])
        h = tn.add(h, ff)
    pooled = tn.row(h, 0) if spec.pooling == "cls" else mean_over_frames(h)
    return tn.l2norm_rows(tn.add(tn.matmul(pooled, p["W_out"]), p["b_out"]))


def mean_over_frames(h):
    """Mean over the frame positions, excluding the CLS row."""
    t = h.shape[0] - 1
    rows = [tn.row(h, i) for i in range(1, t + 1)]
    return tn.mean_rows(tn.concat_rows(rows)) if t > 1 else rows[0]


def head_forward(x, params):
    """Differentiable forward for a trainable head; x is a (T, D) tensor."""
    if params.spec.kind == "lstm":
        return lstm_forward(x, params)
    if params.spec.kind == "transformer":
        return transformer_forward(x, params)
    raise ConfigInvalid(f"{params.spec.kind} head has no differentiable forward")


def fuse_lstm(seq, params):
    out = lstm_forward(Tensor(seq.frames.astype(params.tensors["W_out"].dtype)), params)
    return VideoEmbedding(seq.video_id, out.data.reshape(-1).copy(), "lstm")


def fuse_transformer(seq, params):
    out = transformer_forward(
        Tensor(seq.frames.astype(params.tensors["W_out"].dtype)), params
    )
    return VideoEmbedding(seq.video_id, out.data.reshape(-1).copy(), "transformer")


def embed_sequence(seq, params):
    """Uniform embedding interface across the four embedding-valued heads."""
    kind = params.spec.kind
    if kind == "mid_frame":
        return fuse_mid_frame(seq)
    if kind == "max_pool":
        return fuse_max_pool(seq)
    if kind == "lstm":
        return fuse_lstm(seq, params)
    if kind == "transformer":
        return fuse_transformer(seq, params)
    from .errors import HeadNotEmbedding

    raise HeadNotEmbedding(f"{kind} emits classes, not embeddings")
