"""Cover x method x k x Th sweep: embed, verify, measure, tabulate.

Messages are PRNG bytes from ``numpy.random.default_rng(seed)`` (seed 1729
unless configured). Every cell draws from a fresh generator with the same
seed, so all cells see the same bit stream prefix; by default the message is
cut to the cell's full capacity.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, stego
from .similarity import DiffCache, SimilarityMethod, make_scorer, similarity_map

CELL_FIELDS = ("cover", "method", "k", "Th", "status", "selected_px", "capacity_bits", "message_bits",
               "p_embedded", "capacity_pct", "mse", "psnr_db", "ssim", "uqi", "verified", "note", "error")
TABLE2_FIELDS = ("cover", "k", "Th", "metric", "sm", "t1fls", "it2fls")
METHOD_ORDER = (SimilarityMethod.EuclideanSM, SimilarityMethod.T1FLS, SimilarityMethod.IT2FLS)


@dataclass
class Cell:
    cover: str
    method: str
    k: int
    th: float
    status: str = "ok"
    selected_px: int = 0
    capacity_bits: int = 0
    message_bits: int = 0
    p_embedded: float = math.nan
    capacity_pct: float = math.nan
    mse: float = math.nan
    psnr: float = math.nan
    ssim: float = math.nan
    uqi: float = math.nan
    verified: bool = False
    note: str = ""
    error: str = ""

    def row(self) -> dict:
        f = metrics.fmt
        return {"cover": self.cover, "method": self.method, "k": str(self.k), "Th": f(self.th),
                "status": self.status, "selected_px": str(self.selected_px),
                "capacity_bits": str(self.capacity_bits), "message_bits": str(self.message_bits),
                "p_embedded": f(self.p_embedded), "capacity_pct": f(self.capacity_pct), "mse": f(self.mse),
                "psnr_db": f(self.psnr), "ssim": f(self.ssim), "uqi": f(self.uqi),
                "verified": "true" if self.verified else "false", "note": self.note, "error": self.error}


@dataclass
class SweepResult:
    cells: list[Cell]
    covers: list[str]
    methods: list[str]
    ks: list[int]
    ths: list[float]
    seed: int
    windowed: bool = False
    maps: dict = field(default_factory=dict, repr=False)

    @property
    def failures(self) -> list[Cell]:
        return [c for c in self.cells if c.status != "ok"]

    def cell(self, cover, method, k, th) -> Cell:
        for c in self.cells:
            if (c.cover, c.method, c.k, c.th) == (cover, SimilarityMethod.parse(method).value, k, th):
                return c
        raise KeyError((cover, method, k, th))


def message_bits(n_bits: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return stego.bytes_to_bits(rng.bytes((n_bits + 7) // 8))[:n_bits]


def run_cell(cover_name: str, cover: np.ndarray, smap: np.ndarray, method: SimilarityMethod, k: int, th: float,
             seed: int, payload=None, windowed: bool = False) -> Cell:
    """One sweep cell. ``payload`` is None (fill capacity), an int bit count, or a 0/1 array."""
    cell = Cell(cover_name, method.value, k, th)
    try:
        ind = stego.indicator(smap, th)
        cap = stego.capacity_bits(ind, k)
        cell.selected_px = int(np.count_nonzero(ind))
        cell.capacity_bits = cap
        cell.capacity_pct = stego.capacity(ind, k)
        if payload is None:
            bits = message_bits(cap, seed)
        else:
            src = message_bits(int(payload), seed) if np.isscalar(payload) else np.asarray(payload, np.uint8)
            bits = src[:cap]
            if src.size > cap:
                cell.note = f"message truncated from {src.size} to {cap} bits"
        st, key = stego.embed(cover, ind, k, bits, th=th, method=method)
        cell.message_bits = int(bits.size)
        cell.p_embedded = -(-bits.size // k) / (3.0 * ind.size)
        cell.verified = bool(np.array_equal(stego.extract(st, stego.key_deserialize(key.to_bytes())), bits))
        if not cell.verified:
            raise stego.KeyFormatError("extracted bits differ from the embedded message")
        r = metrics.measure(cover, st, windowed=windowed)
        cell.mse, cell.psnr, cell.ssim, cell.uqi = r.mse, r.psnr, r.ssim, r.uqi
    except Exception as e:  # a failed cell is recorded; the sweep carries on
        cell.status = "failed"
        cell.error = f"{type(e).__name__}: {e}"
    return cell


def _sort_key(c: Cell, covers, methods):
    return (covers.index(c.cover), methods.index(c.method), c.k, c.th)


def run_sweep(covers, methods=METHOD_ORDER, ks=(1, 2, 3, 4), ths=(0.75, 0.77, 0.80, 0.81), config=None,
              cache_mode: str = "lazy", workers: int | None = None, seed: int = 1729, payload=None,
              windowed: bool = False, keep_maps: bool = False) -> SweepResult:
    """``covers`` is a sequence of (name, uint8 RGB array)."""
    methods = [SimilarityMethod.parse(m) for m in methods]
    names = [n for n, _ in covers]
    caches = {m: DiffCache(make_scorer(m, config), cache_mode) for m in methods}
    jobs, maps = [], {}
    for name, img in covers:
        for m in methods:
            try:
                smap = similarity_map(img, m, caches[m], workers=workers)
            except Exception as e:
                for k in ks:
                    for th in ths:
                        jobs.append(Cell(name, m.value, k, th, status="failed", error=f"{type(e).__name__}: {e}"))
                continue
            if keep_maps:
                maps[(name, m.value)] = smap
            jobs.extend((name, img, smap, m, k, th) for k in ks for th in ths)

    def go(job):
        return job if isinstance(job, Cell) else run_cell(*job, seed=seed, payload=payload, windowed=windowed)

    n = max(1, workers or 1)
    if n == 1:
        cells = [go(j) for j in jobs]
    else:
        with ThreadPoolExecutor(n) as ex:
            cells = list(ex.map(go, jobs))
    mnames = [m.value for m in methods]
    cells.sort(key=lambda c: _sort_key(c, names, mnames))
    return SweepResult(cells, names, mnames, list(ks), list(ths), seed, windowed, maps)


def _csv(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cells_csv(res: SweepResult) -> str:
    return _csv(CELL_FIELDS, [c.row() for c in res.cells])


def table2_csv(res: SweepResult) -> str:
    """Quality metrics with one column per method, one row per cover/k/Th/metric."""
    rows = []
    for cover in res.covers:
        for k in res.ks:
            for th in res.ths:
                for metric in ("psnr", "ssim", "uqi"):
                    row = {"cover": cover, "k": str(k), "Th": metrics.fmt(th), "metric": metric.upper()}
                    for m in ("sm", "t1fls", "it2fls"):
                        try:
                            c = res.cell(cover, m, k, th)
                            row[m] = metrics.fmt(getattr(c, metric)) if c.status == "ok" else "failed"
                        except KeyError:
                            row[m] = ""
                    rows.append(row)
    return _csv(TABLE2_FIELDS, rows)


def table3_fields(res: SweepResult) -> tuple[str, ...]:
    return ("Th",) + tuple(f"{m}_k{k}" for m in ("sm", "t1fls", "it2fls") if m in res.methods for k in res.ks)


def table3_csv(res: SweepResult) -> str:
    """Capacity (%) averaged over covers, one row per Th."""
    fields = table3_fields(res)
    rows = []
    for th in res.ths:
        row = {"Th": metrics.fmt(th)}
        for f in fields[1:]:
            m, k = f.rsplit("_k", 1)
            vals = [c.capacity_pct for c in res.cells if c.method == m and c.k == int(k) and c.th == th]
            row[f] = metrics.fmt(float(np.mean(vals))) if vals else "nan"
        rows.append(row)
    return _csv(fields, rows)


def figure_series(res: SweepResult) -> dict:
    """Per-cover metric series for each (metric, Th, k, method): plot-ready lists ordered like ``covers``."""
    out = {"covers": res.covers, "series": {}}
    for metric in ("psnr", "ssim", "uqi"):
        per_th = {}
        for th in res.ths:
            per_k = {}
            for k in res.ks:
                per_k[str(k)] = {m: [_jnum(getattr(res.cell(cv, m, k, th), metric)) for cv in res.covers]
                                 for m in res.methods}
            per_th[metrics.fmt(th)] = per_k
        out["series"][metric] = per_th
    return out


def _jnum(v: float):
    return v if math.isfinite(v) else metrics.fmt(v)


def sweep_json(res: SweepResult) -> str:
    doc = {
        "seed": res.seed,
        "ssim_mode": "windowed-8x8" if res.windowed else "global",
        "covers": res.covers, "methods": res.methods, "k": res.ks, "th": res.ths,
        "failed_cells": len(res.failures),
        "cells": [{k: (_jnum(v) if isinstance(v, float) else v) for k, v in c.__dict__.items()} for c in res.cells],
    }
    return json.dumps(doc, indent=1)


def write_report(res: SweepResult, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "cells.csv": cells_csv(res),
        "table2.csv": table2_csv(res),
        "table3.csv": table3_csv(res),
        "report.json": sweep_json(res),
        "figures.json": json.dumps(figure_series(res), indent=1),
    }
    paths = []
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths
