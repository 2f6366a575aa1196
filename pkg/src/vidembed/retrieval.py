"""Encode-once video embedding index and exact top-k dot-product retrieval."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .data import l2_normalize, read_embeddings, write_embeddings
from .errors import DimMismatch, EmptyDataset, HeadNotEmbedding
from .heads import EMBEDDING_KINDS, embed_sequence


@dataclass
class RankedResult:
    items: list  # [(video_id, score)], scores non-increasing
    query: np.ndarray

    def ids(self):
        return [vid for vid, _ in self.items]


class RetrievalIndex:
    """Immutable N x D store of unit-norm video embeddings."""

    def __init__(self, ids, matrix, head_kind, fingerprint):
        if len(ids) != len(set(ids)):
            raise ValueError("video ids must be unique")
        self.ids = list(ids)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.head_kind = head_kind
        self.fingerprint = fingerprint
        # rank of each row's id in ascending id order, for the tie rule
        self._id_rank = np.empty(len(ids), dtype=np.int64)
        for rank, i in enumerate(sorted(range(len(ids)), key=lambda i: self.ids[i])):
            self._id_rank[i] = rank

    def __len__(self):
        return len(self.ids)

    def save(self, prefix):
        write_embeddings(f"{prefix}.vemb", self.matrix)
        sidecar = {
            "ids": self.ids,
            "head_kind": self.head_kind,
            "fingerprint": self.fingerprint,
        }
        tmp = f"{prefix}.json.tmp"
        with open(tmp, "w") as f:
            json.dump(sidecar, f, sort_keys=True)
        os.replace(tmp, f"{prefix}.json")

    @classmethod
    def load(cls, prefix):
        matrix = read_embeddings(f"{prefix}.vemb")
        with open(f"{prefix}.json") as f:
            sidecar = json.load(f)
        return cls(sidecar["ids"], matrix, sidecar["head_kind"], sidecar["fingerprint"])


def build_index(manifest, params, base_dir, threads=1):
    """Fuse every video in the manifest into one index row; deterministic."""
    if params.spec.kind not in EMBEDDING_KINDS:
        raise HeadNotEmbedding(f"{params.spec.kind} head emits classes, not embeddings")
    if not manifest.records:
        raise EmptyDataset("manifest has no videos")

    def fuse(rec):
        seq = manifest.load_sequence(rec, base_dir)
        seq = seq.__class__(
            seq.video_id, l2_normalize(seq.frames).astype(np.float32), seq.label
        )
        return embed_sequence(seq, params).vector.astype(np.float32)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(fuse, manifest.records))
    else:
        rows = [fuse(rec) for rec in manifest.records]
    ids = [rec.video_id for rec in manifest.records]
    return RetrievalIndex(ids, np.stack(rows), params.spec.kind, params.fingerprint())


def query(index, text_embedding, k=6):
    """Top-k rows by dot product; ties break by ascending video_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(text_embedding, dtype=np.float64).reshape(-1)
    if q.shape[0] != index.matrix.shape[1]:
        raise DimMismatch(f"query dim {q.shape[0]} vs index dim {index.matrix.shape[1]}")
    q = l2_normalize(q).astype(np.float32)
    scores = index.matrix @ q
    order = np.lexsort((index._id_rank, -scores.astype(np.float64)))
    top = order[: min(k, len(index))]
    return RankedResult([(index.ids[i], float(scores[i])) for i in top], q)


def brute_force_topk(matrix, ids, text_embedding, k):
    """Exhaustive full-sort oracle with the same scoring and tie contract.

    Scores are computed with the identical float32 product as query(); only
    the selection (python sort over all rows) differs.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(text_embedding, dtype=np.float64).reshape(-1)
    m = np.ascontiguousarray(matrix, dtype=np.float32)
    if q.shape[0] != m.shape[1]:
        raise DimMismatch(f"query dim {q.shape[0]} vs matrix dim {m.shape[1]}")
    q = l2_normalize(q).astype(np.float32)
    scores = m @ q
    ranked = sorted(
        ((vid, float(s)) for vid, s in zip(ids, scores)),
        key=lambda p: (-p[1], p[0]),
    )
    return RankedResult(ranked[: min(k, len(ids))], q)
