import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fuzzsteg.inference import infer_it2, infer_t1
from fuzzsteg.similarity import (DiffCache, ImageTooSmallError, SimilarityMethod, channel_diff, heatmap,
                                 load_map_binary, make_scorer, pack_keys, pair_similarity, save_map_binary,
                                 similarity_map, unpack_keys, window_similarity)

from oracles import naive_map, window_oracle

METHODS = list(SimilarityMethod)
IT2 = make_scorer("it2fls")
T1 = make_scorer("t1fls")
SM = make_scorer("sm")


def _euclid(d):
    return 1 - math.sqrt(sum(v * v for v in d)) / 3 / 255


def test_method_parsing_and_codes():
    assert SimilarityMethod.parse("IT2") is SimilarityMethod.IT2FLS
    assert SimilarityMethod.parse("euclidean") is SimilarityMethod.EuclideanSM
    assert [m.code for m in METHODS] == [0, 1, 2]
    assert all(SimilarityMethod.from_code(m.code) is m for m in METHODS)
    with pytest.raises(ValueError):
        SimilarityMethod.parse("gaussian")


def test_channel_diff_examples():
    assert channel_diff((7, 8, 9), (7, 8, 9)) == (0, 0, 0)
    assert channel_diff((200, 100, 50), (180, 120, 40)) == (20, 20, 10)
    assert channel_diff((0, 0, 0), (255, 255, 255)) == (255, 255, 255)


def test_pack_roundtrip():
    d = np.random.default_rng(0).integers(0, 256, size=(1000, 3))
    assert np.array_equal(unpack_keys(pack_keys(d)), d)


def test_pair_similarity_examples():
    assert pair_similarity((0, 0, 0), "sm") == 1.0
    assert pair_similarity((255, 255, 255), "sm") == pytest.approx(1 - 1 / math.sqrt(3), abs=1e-12)
    assert round(pair_similarity((255, 255, 255), "sm"), 5) == 0.42265
    assert pair_similarity((0, 0, 0), "it2fls") == pytest.approx(infer_it2([0, 0, 0]), abs=1e-12)
    assert pair_similarity((0, 0, 0), "t1fls") == pytest.approx(infer_t1([0, 0, 0]), abs=1e-12)
    assert pair_similarity((30, 30, 30)) >= pair_similarity((60, 60, 60))
    for m in METHODS:
        assert pair_similarity((0, 0, 0), m) > pair_similarity((255, 255, 255), m)


@given(st.tuples(*[st.integers(0, 255)] * 3), st.tuples(*[st.integers(0, 255)] * 3))
def test_pair_symmetry(p, q):
    for sc in (IT2, SM):
        assert pair_similarity(channel_diff(p, q), scorer=sc) == pair_similarity(channel_diff(q, p), scorer=sc)


@given(st.tuples(*[st.integers(0, 255)] * 3), st.tuples(*[st.integers(0, 255)] * 3))
def test_euclidean_strictly_decreasing_in_norm(a, b):
    na, nb = sum(v * v for v in a), sum(v * v for v in b)
    sa, sb = pair_similarity(a, scorer=SM), pair_similarity(b, scorer=SM)
    assert sa == pytest.approx(_euclid(a), abs=1e-12)
    if na < nb:
        assert sa > sb


def test_window_examples():
    const = np.full((3, 3, 3), 77, np.uint8)
    for m, sc in zip(METHODS, (IT2, T1, SM)):
        s, sa = window_similarity(const, m, sc)
        v = pair_similarity((0, 0, 0), scorer=sc)
        assert np.all(s[~np.eye(9, dtype=bool)] == v) and np.all(np.diag(s) == 1)
        assert sa == pytest.approx(v, abs=1e-15)


@given(arrays(np.uint8, (3, 3, 3)), st.permutations(range(9)))
def test_window_permutation_invariance(win, perm):
    flat = win.reshape(9, 3)[list(perm)].reshape(3, 3, 3)
    s, a = window_similarity(win, scorer=IT2)
    assert np.allclose(s, s.T)
    assert window_similarity(flat, scorer=IT2)[1] == pytest.approx(a, abs=1e-12)


@given(arrays(np.uint8, (3, 3, 3)))
def test_window_matches_scalar_oracle(win):
    a = window_similarity(win, scorer=IT2)[1]
    assert a == pytest.approx(window_oracle(win, lambda d: infer_it2(list(d))), abs=1e-12)
    assert 0.0 <= a <= 1.0


@pytest.mark.parametrize("method", METHODS)
def test_map_equals_naive_oracle(method):
    img = np.random.default_rng(4).integers(0, 256, size=(5, 5, 3), dtype=np.uint8)
    sc = make_scorer(method)
    got = similarity_map(img, method, DiffCache(sc))
    assert np.array_equal(got, naive_map(img, lambda d: pair_similarity(d, scorer=sc)))
    ref = {SimilarityMethod.IT2FLS: lambda d: infer_it2(list(d)),
           SimilarityMethod.T1FLS: lambda d: infer_t1(list(d)), SimilarityMethod.EuclideanSM: _euclid}[method]
    assert np.allclose(got, naive_map(img, ref), atol=1e-12, rtol=0)


def test_constant_image_gives_constant_map():
    img = np.full((9, 7, 3), 130, np.uint8)
    m = similarity_map(img)
    assert np.all(m == m[0, 0])
    assert m[0, 0] == pytest.approx(pair_similarity((0, 0, 0)), abs=1e-15)
    assert np.all(heatmap(m) == heatmap(m)[0, 0])


def test_cache_modes_and_bands_are_transparent(tmp_path):
    img = np.random.default_rng(1).integers(0, 256, size=(20, 17, 3), dtype=np.uint8)
    ref = similarity_map(img, cache=DiffCache(IT2, "off"))
    assert np.array_equal(similarity_map(img, cache=DiffCache(IT2, "lazy")), ref)
    assert np.array_equal(similarity_map(img, cache=DiffCache(IT2, "lazy"), band_rows=3), ref)
    assert np.array_equal(similarity_map(img, cache=DiffCache(SM, "dense", tmp_path / "sm.npy")),
                          similarity_map(img, "sm", DiffCache(SM, "off")))
    assert (tmp_path / "sm.npy").exists()


def test_lazy_cache_memoizes():
    c = DiffCache(IT2)
    d = np.random.default_rng(2).integers(0, 256, size=(10_000, 3))
    first = c.lookup(pack_keys(d))
    n = c.inferences
    assert n == len(np.unique(pack_keys(d)))
    assert np.array_equal(c.lookup(pack_keys(d)), first)
    assert c.inferences == n
    assert np.array_equal(first, IT2.evaluate(d))
    assert c((1, 2, 3)) == pair_similarity((1, 2, 3))


def test_dense_equals_lazy_for_sm(tmp_path):
    d = np.random.default_rng(3).integers(0, 256, size=(5000, 3))
    dense = DiffCache(SM, "dense")
    assert np.array_equal(dense.lookup(pack_keys(d)), DiffCache(SM).lookup(pack_keys(d)))
    assert len(dense) == 1 << 24


def test_concurrent_lazy_inserts_agree():
    from concurrent.futures import ThreadPoolExecutor
    c = DiffCache(IT2)
    rng = np.random.default_rng(9)
    batches = [pack_keys(rng.integers(0, 64, size=(2000, 3))) for _ in range(8)]
    with ThreadPoolExecutor(4) as ex:
        outs = list(ex.map(c.lookup, batches))
    for k, v in zip(batches, outs):
        assert np.array_equal(v, IT2.evaluate(unpack_keys(k)))
        assert np.array_equal(c.lookup(k), v)


def test_grayscale_is_replicated_and_small_images_rejected():
    g = np.random.default_rng(0).integers(0, 256, size=(6, 6), dtype=np.uint8)
    assert np.array_equal(similarity_map(g), similarity_map(np.repeat(g[:, :, None], 3, 2)))
    with pytest.raises(ImageTooSmallError):
        similarity_map(np.zeros((2, 5, 3), np.uint8))


def test_map_binary_and_heatmap(tmp_path):
    m = similarity_map(np.random.default_rng(0).integers(0, 256, size=(8, 9, 3), dtype=np.uint8))
    save_map_binary(m, tmp_path / "m.smap")
    assert (tmp_path / "m.smap").stat().st_size == 8 * 9 * 8
    assert np.array_equal(load_map_binary(tmp_path / "m.smap", m.shape), m)
    assert np.array_equal(heatmap(np.array([[0.0, 0.5, 1.0, 0.2]])), [[0, 128, 255, 51]])


def test_thread_count_does_not_change_map():
    code = ("import numpy as np, sys; from fuzzsteg.similarity import similarity_map; "
            "img=np.random.default_rng(7).integers(0,256,(64,48,3),dtype=np.uint8); "
            "w=int(sys.argv[1]); sys.stdout.write(similarity_map(img, workers=w, band_rows=16).tobytes().hex())")
    env = dict(os.environ, NUMBA_NUM_THREADS="4")
    outs = [subprocess.run([sys.executable, "-c", code, w], env=env, capture_output=True, text=True, check=True).stdout
            for w in ("1", "4")]
    assert outs[0] == outs[1] and outs[0]
