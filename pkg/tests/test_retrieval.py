import numpy as np
import pytest

from vidembed.data import DatasetManifest, l2_normalize
from vidembed.errors import DimMismatch, EmptyDataset, HeadNotEmbedding, NormUnderflow
from vidembed.heads import HeadParams, HeadSpec, embed_sequence, init_params
from vidembed.retrieval import RetrievalIndex, brute_force_topk, build_index, query


def _random_index(rng, n, d):
    ids = [f"vid_{i:05d}" for i in rng.permutation(n)]
    matrix = l2_normalize(rng.standard_normal((n, d))).astype(np.float32)
    return RetrievalIndex(ids, matrix, "max_pool", "test")


def test_query_self_similarity():
    rng = np.random.default_rng(0)
    index = _random_index(rng, 50, 8)
    result = query(index, index.matrix[7], k=1)
    assert result.items[0][0] == index.ids[7]
    assert result.items[0][1] == pytest.approx(1.0, abs=1e-6)


def test_query_default_k_is_6():
    rng = np.random.default_rng(1)
    index = _random_index(rng, 20, 8)
    result = query(index, rng.standard_normal(8))
    assert len(result.items) == 6


def test_query_scores_sorted_and_bounded():
    rng = np.random.default_rng(2)
    index = _random_index(rng, 100, 16)
    result = query(index, rng.standard_normal(16), k=30)
    scores = [s for _, s in result.items]
    assert scores == sorted(scores, reverse=True)
    assert all(-1 - 1e-6 <= s <= 1 + 1e-6 for s in scores)


def test_query_k_larger_than_n():
    rng = np.random.default_rng(3)
    index = _random_index(rng, 4, 8)
    result = query(index, rng.standard_normal(8), k=10)
    assert len(result.items) == 4


def test_query_dim_mismatch():
    rng = np.random.default_rng(4)
    index = _random_index(rng, 5, 8)
    with pytest.raises(DimMismatch):
        query(index, np.ones(7))


def test_query_zero_vector_rejected():
    rng = np.random.default_rng(5)
    index = _random_index(rng, 5, 8)
    with pytest.raises(NormUnderflow):
        query(index, np.zeros(8))


def test_query_tie_break_ascending_id():
    matrix = np.stack([np.array([1.0, 0.0], dtype=np.float32)] * 3)
    index = RetrievalIndex(["zebra", "apple", "mango"], matrix, "max_pool", "fp")
    result = query(index, [1.0, 0.0], k=3)
    assert result.ids() == ["apple", "mango", "zebra"]


def test_brute_force_degenerate_cases():
    matrix = np.array([[0.6, 0.8]], dtype=np.float32)
    res = brute_force_topk(matrix, ["only"], [-1.0, 0.0], k=5)
    assert res.ids() == ["only"]
    assert res.items[0][1] < 0  # negative score still returned


def test_query_matches_brute_force_oracle():
    rng = np.random.default_rng(6)
    checked = 0
    for n in (1, 2, 100, 1000):
        index = _random_index(rng, n, 16)
        for k in (1, 6, n, n + 5):
            for _ in range(4):
                q = rng.standard_normal(16)
                fast = query(index, q, k)
                slow = brute_force_topk(index.matrix, index.ids, q, k)
                assert fast.items == slow.items
                checked += 1
    assert checked >= 60


def test_index_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    index = _random_index(rng, 30, 8)
    prefix = str(tmp_path / "idx")
    index.save(prefix)
    loaded = RetrievalIndex.load(prefix)
    assert loaded.ids == index.ids
    assert np.array_equal(loaded.matrix, index.matrix)
    assert loaded.head_kind == index.head_kind
    assert loaded.fingerprint == index.fingerprint
    q = rng.standard_normal(8)
    assert query(loaded, q, 5).items == query(index, q, 5).items


def test_build_index_rows_match_fuse(anchor_ds):
    manifest, protos, out = anchor_ds
    params = HeadParams(HeadSpec(kind="max_pool", d_in=16), {})
    index = build_index(manifest, params, out)
    assert len(index) == len(manifest.records)
    for i, rec in enumerate(manifest.records[:5]):
        seq = manifest.load_sequence(rec, out)
        seq = seq.__class__(seq.video_id, l2_normalize(seq.frames).astype(np.float32), seq.label)
        emb = embed_sequence(seq, params)
        assert np.array_equal(index.matrix[i], emb.vector.astype(np.float32))
        assert index.ids[i] == rec.video_id


def test_build_index_deterministic(anchor_ds):
    manifest, protos, out = anchor_ds
    params = init_params(HeadSpec(kind="lstm", d_in=16), seed=3)
    i1 = build_index(manifest, params, out)
    i2 = build_index(manifest, params, out)
    assert i1.ids == i2.ids
    assert np.array_equal(i1.matrix, i2.matrix)
    assert i1.fingerprint == i2.fingerprint


def test_build_index_threads_match_serial(anchor_ds):
    manifest, protos, out = anchor_ds
    params = HeadParams(HeadSpec(kind="mid_frame", d_in=16), {})
    i1 = build_index(manifest, params, out, threads=1)
    i4 = build_index(manifest, params, out, threads=4)
    assert i1.ids == i4.ids
    assert np.array_equal(i1.matrix, i4.matrix)


def test_build_index_rejects_majority_vote(anchor_ds):
    manifest, protos, out = anchor_ds
    with pytest.raises(HeadNotEmbedding):
        build_index(manifest, HeadParams(HeadSpec(kind="majority_vote", d_in=16), {}), out)


def test_build_index_empty_manifest(anchor_ds):
    _, protos, out = anchor_ds
    empty = DatasetManifest(dim=16, class_names=protos.names)
    with pytest.raises(EmptyDataset):
        build_index(empty, HeadParams(HeadSpec(kind="max_pool", d_in=16), {}), out)


def test_concurrent_queries_match_serial(anchor_ds):
    from concurrent.futures import ThreadPoolExecutor

    manifest, protos, out = anchor_ds
    params = HeadParams(HeadSpec(kind="max_pool", d_in=16), {})
    index = build_index(manifest, params, out)
    queries = [protos.vectors[i % 5] for i in range(20)]
    serial = [query(index, q, 6).items for q in queries]
    with ThreadPoolExecutor(max_workers=8) as pool:
        parallel = list(pool.map(lambda q: query(index, q, 6).items, queries))
    assert serial == parallel


def test_prototype_query_returns_own_class(anchor_ds):
    manifest, protos, out = anchor_ds
    params = HeadParams(HeadSpec(kind="max_pool", d_in=16), {})
    index = build_index(manifest, params, out)
    for c, name in enumerate(protos.names):
        result = query(index, protos.vectors[c], 6)
        for vid, _ in result.items:
            assert vid.startswith(name)
