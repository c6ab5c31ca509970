"""Pixel similarity over 3x3 neighbourhoods.

Every pixel gets a 3x3 window (edges replicated at the border). The 36
unordered pixel pairs of the window are scored, giving a symmetric 9x9
relation matrix; each window pixel's similarity is the mean of its row
without the diagonal, and the window value is the mean of those nine.

Pair scores depend only on the absolute channel differences, so they are
memoized on the packed ``(dR << 16) | (dG << 8) | dB`` key.
"""

from __future__ import annotations

import enum
import hashlib
import threading
from pathlib import Path

import numpy as np

from . import _kernels
from .inference import FLSEngine


class ImageTooSmallError(ValueError):
    pass


class SimilarityMethod(enum.Enum):
    IT2FLS = "it2fls"
    T1FLS = "t1fls"
    EuclideanSM = "sm"

    @property
    def code(self) -> int:
        return {"it2fls": 0, "t1fls": 1, "sm": 2}[self.value]

    @classmethod
    def from_code(cls, code: int) -> "SimilarityMethod":
        for m in cls:
            if m.code == code:
                return m
        raise ValueError(f"unknown method code {code}")

    @classmethod
    def parse(cls, value) -> "SimilarityMethod":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        aliases = {"it2": "it2fls", "t1": "t1fls", "euclidean": "sm", "euclideansm": "sm"}
        return cls(aliases.get(v, v))


# Window pixels, row-major with the centre last: P1..P8 neighbours, P9 centre.
OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1), (0, 0))
PAIRS = tuple((m, n) for m in range(9) for n in range(m + 1, 9))
_PAIR_INDEX = {p: i for i, p in enumerate(PAIRS)}


class EuclideanScorer:
    """Similarity 1 - D/255 with D = sqrt(dR^2 + dG^2 + dB^2) / 3."""

    method = SimilarityMethod.EuclideanSM

    def evaluate(self, diffs) -> np.ndarray:
        d = np.asarray(diffs, dtype=np.float64)
        dist = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]) / 3.0
        return 1.0 - dist / 255.0

    def fingerprint(self) -> str:
        return "sm-v1"


def _engine_fingerprint(e: FLSEngine) -> str:
    h = hashlib.sha256()
    h.update(b"t2" if e.type2 else b"t1")
    for a in (e.xs, e._in_lo, e._in_up, e._out_lo, e._out_up, e._ante, e._cons):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def make_scorer(method, config=None):
    """Pair scorer for ``method``; FLS methods take vocabularies and rules from ``config``."""
    method = SimilarityMethod.parse(method)
    if method is SimilarityMethod.EuclideanSM:
        return EuclideanScorer()
    type2 = method is SimilarityMethod.IT2FLS
    if config is None:
        eng = FLSEngine(type2=type2)
    else:
        color, sim = (config.color, config.similarity) if type2 else (config.t1_color, config.t1_similarity)
        eng = FLSEngine(config.rulebase, color, sim, config.n, type2=type2)
    eng.method = method
    eng.fingerprint = lambda e=eng: _engine_fingerprint(e)
    return eng


def pack_keys(d: np.ndarray) -> np.ndarray:
    return (d[..., 0].astype(np.int32) << 16) | (d[..., 1].astype(np.int32) << 8) | d[..., 2].astype(np.int32)


def unpack_keys(keys: np.ndarray) -> np.ndarray:
    k = np.asarray(keys, dtype=np.int64)
    return np.stack([(k >> 16) & 0xFF, (k >> 8) & 0xFF, k & 0xFF], axis=-1)


def channel_diff(p, q) -> tuple[int, int, int]:
    return tuple(abs(int(a) - int(b)) for a, b in zip(p, q))


def pair_similarity(d, method=SimilarityMethod.IT2FLS, scorer=None) -> float:
    scorer = scorer or make_scorer(method)
    return float(scorer.evaluate(np.array([d], dtype=np.int64))[0])


class DiffCache:
    """Memo of pair similarity keyed by the exact difference triple.

    Modes: ``lazy`` fills a sorted key/value store on demand, ``dense``
    precomputes all 256^3 triples (128 MiB of float64; can be persisted with
    ``table_path``), ``off`` evaluates every request afresh.
    """

    DENSE_SIZE = 1 << 24
    _DENSE_CHUNK = 1 << 20

    def __init__(self, scorer, mode: str = "lazy", table_path: str | Path | None = None):
        if mode not in ("lazy", "dense", "off"):
            raise ValueError(f"unknown cache mode {mode!r}")
        self.scorer = scorer
        self.mode = mode
        self.table_path = Path(table_path) if table_path else None
        self.inferences = 0
        self._lock = threading.Lock()
        self._keys = np.empty(0, dtype=np.int32)
        self._vals = np.empty(0, dtype=np.float64)
        self._table = None

    def _compute(self, keys: np.ndarray) -> np.ndarray:
        self.inferences += keys.size
        return self.scorer.evaluate(unpack_keys(keys))

    def dense_table(self) -> np.ndarray:
        if self._table is None:
            with self._lock:
                if self._table is None:
                    self._table = self._load_or_build()
        return self._table

    def _load_or_build(self) -> np.ndarray:
        if self.table_path is not None and self.table_path.exists():
            t = np.load(self.table_path, mmap_mode=None)
            if t.shape == (self.DENSE_SIZE,) and t.dtype == np.float64:
                return t
        t = np.empty(self.DENSE_SIZE)
        for s in range(0, self.DENSE_SIZE, self._DENSE_CHUNK):
            t[s:s + self._DENSE_CHUNK] = self._compute(np.arange(s, s + self._DENSE_CHUNK, dtype=np.int32))
        if self.table_path is not None:
            self.table_path.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.table_path.with_suffix(".tmp.npy")
            np.save(tmp, t)
            tmp.replace(self.table_path)
        return t

    def lookup(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int32)
        if self.mode == "off":
            return self._compute(keys.ravel()).reshape(keys.shape)
        if self.mode == "dense":
            return self.dense_table()[keys]
        uniq, inv = np.unique(keys, return_inverse=True)
        known_k, known_v = self._keys, self._vals
        pos = np.searchsorted(known_k, uniq)
        hit = pos < known_k.size
        hit[hit] = known_k[pos[hit]] == uniq[hit]
        vals = np.empty(uniq.size)
        vals[hit] = known_v[pos[hit]]
        if not hit.all():
            miss = uniq[~hit]
            mv = self._compute(miss)
            vals[~hit] = mv
            with self._lock:
                # Concurrent writers compute identical values, so a lost merge only costs a recompute.
                k = np.concatenate([self._keys, miss])
                v = np.concatenate([self._vals, mv])
                k, idx = np.unique(k, return_index=True)
                self._keys, self._vals = k, v[idx]
        return vals[inv.reshape(keys.shape)]

    def __call__(self, d) -> float:
        return float(self.lookup(pack_keys(np.asarray([d])))[0])

    def __len__(self):
        return self.DENSE_SIZE if self._table is not None else self._keys.size


def window_similarity(window, method=SimilarityMethod.IT2FLS, scorer=None) -> tuple[np.ndarray, float]:
    """Relation matrix and window similarity for a (3, 3, 3) RGB window."""
    w = np.asarray(window)
    if w.shape != (3, 3, 3):
        raise ValueError("window must have shape (3, 3, 3)")
    scorer = scorer or make_scorer(method)
    px = [w[1 + dy, 1 + dx] for dy, dx in OFFSETS]
    diffs = np.array([channel_diff(px[m], px[n]) for m, n in PAIRS], dtype=np.int64)
    vals = scorer.evaluate(diffs)
    s = np.eye(9)
    for (m, n), v in zip(PAIRS, vals):
        s[m, n] = s[n, m] = v
    total = 0.0
    for i in range(9):
        row = 0.0
        for n in range(9):
            if n != i:
                row += s[i, n]
        total += row / 8.0
    return s, total / 9.0


def as_rgb(img) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim == 2:
        a = np.repeat(a[:, :, None], 3, axis=2)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected an RGB image of shape (H, W, 3), got {a.shape}")
    if a.dtype != np.uint8:
        if a.min() < 0 or a.max() > 255:
            raise ValueError("image samples must lie in [0, 255]")
        a = a.astype(np.uint8)
    return a


def similarity_map(img, method=SimilarityMethod.IT2FLS, cache: DiffCache | None = None,
                   workers: int | None = None, band_rows: int = 64, config=None) -> np.ndarray:
    """Per-pixel window similarity, shape (H, W), values in [0, 1].

    ``workers`` sets the compiled kernel's thread count; the result does not
    depend on it, nor on the cache mode or ``band_rows``.
    """
    a = as_rgb(img)
    h, w, _ = a.shape
    if h < 3 or w < 3:
        raise ImageTooSmallError(f"image is {h}x{w}; need at least 3x3")
    if cache is None:
        cache = DiffCache(make_scorer(method, config))
    _kernels.set_workers(workers)
    pad = np.pad(a, ((1, 1), (1, 1), (0, 0)), mode="edge").astype(np.int16)
    out = np.empty((h, w))
    for r0 in range(0, h, band_rows):
        r1 = min(r0 + band_rows, h)
        planes = [pad[r0 + 1 + dy:r1 + 1 + dy, 1 + dx:w + 1 + dx] for dy, dx in OFFSETS]
        keys = np.stack([pack_keys(np.abs(planes[m] - planes[n])) for m, n in PAIRS])
        vals = cache.lookup(keys)
        total = np.zeros((r1 - r0, w))
        for i in range(9):
            row = np.zeros((r1 - r0, w))
            for n in range(9):
                if n != i:
                    row = row + vals[_PAIR_INDEX[(min(i, n), max(i, n))]]
            total = total + row / 8.0
        out[r0:r1] = total / 9.0
    return out


def save_map_binary(smap: np.ndarray, path) -> None:
    np.ascontiguousarray(smap, dtype="<f8").tofile(path)


def load_map_binary(path, shape) -> np.ndarray:
    return np.fromfile(path, dtype="<f8").reshape(shape)


def heatmap(smap: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(smap, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
