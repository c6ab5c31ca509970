"""``fuzzsteg`` command line."""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import metrics, report, stego, synth
from .config import config_to_dict, load_config
from .images import ImageIOError, LossyFormatError, read_image, write_image
from .inference import ConfigurationError, NoRuleFiredError
from .similarity import (DiffCache, ImageTooSmallError, SimilarityMethod, heatmap, make_scorer,
                         save_map_binary, similarity_map)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CAPACITY = 4
EXIT_INTEGRITY = 5
EXIT_CONFIG = 6
EXIT_CELLS = 7


class UsageError(Exception):
    pass


def _method(v: str) -> SimilarityMethod:
    try:
        return SimilarityMethod.parse(v)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (default: $FUZZSTEG_CONFIG or ./fuzzsteg.json)")
    p.add_argument("--workers", type=int, help="kernel/cell threads (0 = all available)")
    p.add_argument("--cache", choices=("lazy", "dense", "off"), help="pair-similarity memo mode")
    p.add_argument("--cache-table", help="file to load/save the dense 256^3 table")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fuzzsteg", description="Similarity-guided LSB steganography toolkit.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simmap", help="compute the per-pixel similarity map of a cover")
    p.add_argument("cover")
    p.add_argument("--method", type=_method, default=SimilarityMethod.IT2FLS)
    p.add_argument("--out", required=True, help="output prefix; writes PREFIX.smap and PREFIX.png")
    _common(p)

    p = sub.add_parser("embed", help="hide a file in a cover")
    p.add_argument("cover")
    p.add_argument("message", help="message file (raw bytes)")
    p.add_argument("--method", type=_method, default=SimilarityMethod.IT2FLS)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--th", type=float, default=0.80)
    p.add_argument("--out", required=True, help="stego image (.png or .bmp)")
    p.add_argument("--key", help="key sidecar path (default: OUT with .stgkey suffix)")
    _common(p)

    p = sub.add_parser("extract", help="recover a message from a stego image and key")
    p.add_argument("stego")
    p.add_argument("key")
    p.add_argument("--out", required=True, help="message output file")

    p = sub.add_parser("metrics", help="quality metrics between a cover and a stego image")
    p.add_argument("cover")
    p.add_argument("stego")
    p.add_argument("--method", type=_method)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--th", type=float, default=float("nan"))
    p.add_argument("--key", help="key sidecar; fills k, Th, method and capacity")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.add_argument("--windowed", action="store_true", help="SSIM over 8x8 tiles instead of global statistics")
    p.add_argument("--out", help="write the row here instead of stdout")

    p = sub.add_parser("report", help="sweep covers x methods x k x Th and write tables")
    p.add_argument("covers", nargs="*", help="cover images; omit to use synthetic covers")
    p.add_argument("--synthetic", type=int, default=10, help="number of synthetic covers when none are given")
    p.add_argument("--size", type=int, default=512, help="synthetic cover size")
    p.add_argument("--method", type=_method, nargs="+", default=list(report.METHOD_ORDER))
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--th", type=float, nargs="+")
    p.add_argument("--message", help="message file; cut to each cell's capacity")
    p.add_argument("--payload-bits", type=int, help="PRNG message of this many bits instead of filling capacity")
    p.add_argument("--seed", type=int, help="message PRNG seed")
    p.add_argument("--windowed", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    _common(p)

    p = sub.add_parser("bench", help="time the similarity map with lazy and dense caches")
    p.add_argument("cover", nargs="?", help="cover image (default: 512x512 synthetic)")
    p.add_argument("--method", type=_method, default=SimilarityMethod.IT2FLS)
    p.add_argument("--out", help="write timings as JSON here")
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic cover image")
    p.add_argument("--kind", choices=synth.KINDS, default="natural")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("config", help="print the effective configuration as JSON")
    p.add_argument("--config")
    return ap


def _cfg(args):
    cfg = load_config(getattr(args, "config", None))
    workers = args.workers if getattr(args, "workers", None) is not None else cfg.workers
    cache = getattr(args, "cache", None) or cfg.cache
    return cfg, workers, cache


def _warn_k(k: int) -> None:
    if k > 4:
        print(f"warning: k={k} > 4 replaces high-order bits; expect visible distortion", file=sys.stderr)


def _check_lossless(path: str) -> None:
    if Path(path).suffix.lower() not in (".png", ".bmp"):
        raise LossyFormatError(f"{path}: output must be PNG or BMP; lossy formats destroy LSB payloads")


def _map(img, method, args):
    cfg, workers, cache = _cfg(args)
    dc = DiffCache(make_scorer(method, cfg), cache, getattr(args, "cache_table", None))
    return similarity_map(img, method, dc, workers=workers)


def cmd_simmap(args) -> int:
    img = read_image(args.cover)
    smap = _map(img, args.method, args)
    save_map_binary(smap, f"{args.out}.smap")
    write_image(f"{args.out}.png", heatmap(smap))
    print(f"shape {smap.shape[0]}x{smap.shape[1]}  min {smap.min():.6f}  max {smap.max():.6f}  mean {smap.mean():.6f}")
    return EXIT_OK


def cmd_embed(args) -> int:
    _check_lossless(args.out)
    _warn_k(args.k)
    img = read_image(args.cover)
    try:
        data = Path(args.message).read_bytes()
    except OSError as e:
        raise ImageIOError(f"cannot read message {args.message}: {e}") from e
    ind = stego.indicator(_map(img, args.method, args), args.th)
    bits = stego.bytes_to_bits(data)
    st, key = stego.embed(img, ind, args.k, bits, th=args.th, method=args.method)
    write_image(args.out, st)
    key_path = args.key or str(Path(args.out).with_suffix(".stgkey"))
    Path(key_path).write_bytes(key.to_bytes())
    cap = stego.capacity_bits(ind, args.k)
    print(f"capacity {stego.capacity(ind, args.k):.4f}% ({cap} bits)  used {bits.size} bits  key {key_path}")
    return EXIT_OK


def cmd_extract(args) -> int:
    try:
        raw = Path(args.key).read_bytes()
    except OSError as e:
        raise ImageIOError(f"cannot read key {args.key}: {e}") from e
    key = stego.key_deserialize(raw)
    bits = stego.extract(read_image(args.stego), key)
    Path(args.out).write_bytes(stego.bits_to_bytes(bits))
    pad = (-key.message_bit_length) % 8
    print(f"extracted {key.message_bit_length} bits ({pad} padding bits in the last byte)")
    return EXIT_OK


def cmd_metrics(args) -> int:
    cover, st = read_image(args.cover), read_image(args.stego)
    if cover.shape != st.shape:
        raise stego.ShapeMismatchError(f"cover {cover.shape} and stego {st.shape} differ in shape")
    k, th, method, cap = args.k, args.th, args.method, float("nan")
    if args.key:
        key = stego.key_deserialize(Path(args.key).read_bytes())
        k, th, method, cap = key.k, key.th, key.method, stego.capacity(key.mask, key.k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", metrics.UndefinedMetricWarning)
        r = metrics.measure(cover, st, cap, method.value if method else "", k, th, windowed=args.windowed)
    text = r.to_json() + "\n" if args.json else metrics.reports_to_csv([r])
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    cfg, workers, cache = _cfg(args)
    ks = args.k or list(cfg.k)
    ths = args.th or list(cfg.th)
    for k in ks:
        _warn_k(k)
    if args.covers:
        covers = [(Path(c).stem, read_image(c)) for c in args.covers]
    else:
        covers = synth.cover_set(args.synthetic, args.size)
    payload = args.payload_bits
    if args.message:
        try:
            payload = stego.bytes_to_bits(Path(args.message).read_bytes())
        except OSError as e:
            raise ImageIOError(f"cannot read message {args.message}: {e}") from e
    seed = cfg.seed if args.seed is None else args.seed
    res = report.run_sweep(covers, args.method, ks, ths, cfg, cache, workers, seed, payload, args.windowed)
    for p in report.write_report(res, args.out):
        print(p)
    bad = res.failures
    print(f"{len(res.cells)} cells, {len(bad)} failed")
    for c in bad:
        print(f"  FAILED {c.cover} {c.method} k={c.k} Th={c.th}: {c.error}", file=sys.stderr)
    return EXIT_CELLS if bad else EXIT_OK


def cmd_bench(args) -> int:
    cfg, workers, _ = _cfg(args)
    img = read_image(args.cover) if args.cover else synth.make_cover("natural", 512, 0)
    scorer = make_scorer(args.method, cfg)
    out = {"shape": list(img.shape[:2]), "method": args.method.value}
    t = time.perf_counter()
    ref = similarity_map(img, args.method, DiffCache(scorer, "lazy"), workers=workers)
    out["lazy_s"] = time.perf_counter() - t
    dense = DiffCache(scorer, "dense", args.cache_table)
    t = time.perf_counter()
    dense.dense_table()
    out["dense_table_s"] = time.perf_counter() - t
    t = time.perf_counter()
    again = similarity_map(img, args.method, dense, workers=workers)
    out["dense_rerun_s"] = time.perf_counter() - t
    out["identical"] = bool(np.array_equal(ref, again))
    text = json.dumps(out, indent=1)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    write_image(args.out, synth.make_cover(args.kind, args.size, args.seed))
    return EXIT_OK


def cmd_config(args) -> int:
    print(json.dumps(config_to_dict(load_config(args.config)), indent=1))
    return EXIT_OK


COMMANDS = {"simmap": cmd_simmap, "embed": cmd_embed, "extract": cmd_extract, "metrics": cmd_metrics,
            "report": cmd_report, "bench": cmd_bench, "synth": cmd_synth, "config": cmd_config}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except ConfigurationError as e:
        code, msg = EXIT_CONFIG, f"config error: {e}"
    except stego.CapacityError as e:
        code, msg = EXIT_CAPACITY, f"capacity error: {e}"
    except (stego.KeyFormatError, stego.ShapeMismatchError) as e:
        code, msg = EXIT_INTEGRITY, f"integrity error: {e}"
    except (LossyFormatError, ImageTooSmallError, NoRuleFiredError) as e:
        code, msg = EXIT_USAGE, f"error: {e}"
    except (ImageIOError, OSError) as e:
        code, msg = EXIT_IO, f"I/O error: {e}"
    except ValueError as e:
        code, msg = EXIT_USAGE, f"error: {e}"
    print(msg, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
