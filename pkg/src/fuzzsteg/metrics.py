"""Cover/stego quality metrics: MSE, PSNR, SSIM and UQI."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

L = 255.0
C1 = (0.01 * L) ** 2
C2 = (0.03 * L) ** 2


class UndefinedMetricWarning(RuntimeWarning):
    pass


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    return a, b


def mse(x, y) -> float:
    """Mean squared error over every sample of every channel."""
    a, b = _pair(x, y)
    return float(np.mean((a - b) ** 2))


def psnr(x, y) -> float:
    """PSNR in dB; ``math.inf`` for identical images."""
    m = mse(x, y)
    return math.inf if m == 0.0 else 10.0 * math.log10(L * L / m)


def _stats(a: np.ndarray, b: np.ndarray):
    mx, my = a.mean(), b.mean()
    dx, dy = a - mx, b - my
    return mx, my, (dx * dx).mean(), (dy * dy).mean(), (dx * dy).mean()


def _ssim_block(a, b) -> float:
    mx, my, vx, vy, cxy = _stats(a, b)
    return ((2 * mx * my + C1) * (2 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2))


def ssim(x, y, windowed: bool = False, block: int = 8) -> float:
    """SSIM from global statistics per channel, averaged over channels.

    With ``windowed=True`` the mean over non-overlapping ``block`` x ``block``
    tiles is used instead (partial tiles at the right/bottom edges are dropped).
    """
    a, b = _pair(x, y)
    vals = []
    for c in range(a.shape[2]):
        p, q = a[:, :, c], b[:, :, c]
        if not windowed:
            vals.append(_ssim_block(p, q))
            continue
        h, w = (p.shape[0] // block) * block, (p.shape[1] // block) * block
        if h == 0 or w == 0:
            raise ValueError(f"image smaller than one {block}x{block} tile")
        tiles = [_ssim_block(p[i:i + block, j:j + block], q[i:i + block, j:j + block])
                 for i in range(0, h, block) for j in range(0, w, block)]
        vals.append(float(np.mean(tiles)))
    return float(np.mean(vals))


def uqi(x, y) -> float:
    """Universal quality index per channel, averaged.

    Undefined when a channel has zero variance in both images or zero mean in
    both; then ``nan`` is returned with an ``UndefinedMetricWarning``.
    """
    a, b = _pair(x, y)
    vals = []
    for c in range(a.shape[2]):
        mx, my, vx, vy, cxy = _stats(a[:, :, c], b[:, :, c])
        den = (vx + vy) * (mx * mx + my * my)
        if den == 0.0:
            warnings.warn(
                f"UQI undefined for channel {c}: zero variance or zero mean in both images",
                UndefinedMetricWarning, stacklevel=2,
            )
            return math.nan
        vals.append(4 * cxy * mx * my / den)
    return float(np.mean(vals))


def fmt(v: float) -> str:
    if math.isinf(v):
        return "inf"
    if math.isnan(v):
        return "nan"
    return repr(float(v))


CSV_FIELDS = ("method", "k", "Th", "psnr_db", "ssim", "uqi", "capacity_pct")


@dataclass
class MetricsReport:
    mse: float
    psnr: float
    ssim: float
    uqi: float
    capacity_pct: float = math.nan
    method: str = ""
    k: int = 0
    th: float = math.nan
    ssim_mode: str = "global"

    def csv_row(self) -> dict:
        return {"method": self.method, "k": str(self.k), "Th": fmt(self.th), "psnr_db": fmt(self.psnr),
                "ssim": fmt(self.ssim), "uqi": fmt(self.uqi), "capacity_pct": fmt(self.capacity_pct)}

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps({k: (fmt(v) if isinstance(v, float) and not math.isfinite(v) else v)
                           for k, v in d.items()})

    @classmethod
    def from_json(cls, s: str) -> "MetricsReport":
        d = json.loads(s)
        return cls(**{k: (float(v) if isinstance(v, str) and k not in ("method", "ssim_mode") else v)
                      for k, v in d.items()})


def measure(cover, stego, capacity_pct: float = math.nan, method: str = "", k: int = 0,
            th: float = math.nan, windowed: bool = False) -> MetricsReport:
    m = mse(cover, stego)
    return MetricsReport(
        mse=m,
        psnr=math.inf if m == 0.0 else 10.0 * math.log10(L * L / m),
        ssim=ssim(cover, stego, windowed=windowed),
        uqi=uqi(cover, stego),
        capacity_pct=capacity_pct, method=method, k=k, th=th,
        ssim_mode="windowed-8x8" if windowed else "global",
    )


def reports_to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow(r.csv_row())
    return buf.getvalue()


def reports_from_csv(text: str) -> list[dict]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append({"method": row["method"], "k": int(row["k"]), "Th": float(row["Th"]),
                    "psnr_db": float(row["psnr_db"]), "ssim": float(row["ssim"]),
                    "uqi": float(row["uqi"]), "capacity_pct": float(row["capacity_pct"])})
    return out
