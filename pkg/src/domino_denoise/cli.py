"""Command-line front end: denoise, add-noise, tile, count, benchmark.

Exit codes: 0 success, 1 invalid arguments, 2 I/O failure, 3 numeric abort.
Every output file is written to a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .imaging import FormatError, Image, NoiseSpec, add_noise, atomic_write_bytes, load_image, psnr, save_image, ssim
from .tiling import (
    FILLS,
    Parity,
    SizeLimitError,
    count_tilings_exact,
    count_tilings_formula,
    pixel_domino_pair,
)
from .trainer import DenoiseConfig, NumericalError, denoise, subseed

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

MODE_NAMES = {"dd": "domino-denoise", "n2f-domino": "n2f-domino"}
# benchmark method -> (trainer mode, validation fill)
METHODS = {
    "dd": ("domino-denoise", "domino"),
    "n2f-domino": ("n2f-domino", "domino"),
    "avg-nbr": ("domino-denoise", "avg"),
    "rand-nbr": ("domino-denoise", "rand"),
    "best-nbr": ("domino-denoise", "best"),
}
IMAGE_SUFFIXES = (".png", ".pgm", ".pnm")
CSV_COLUMNS = ("image", "method", "noise", "psnr", "ssim", "seconds")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with code 1 (not argparse's 2) on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return value


def _float_list(values: Sequence[str]) -> list[float]:
    out = []
    for chunk in values:
        out += [float(v) for v in chunk.split(",") if v]
    return out


def _name_list(values: Sequence[str]) -> list[str]:
    out = []
    for chunk in values:
        out += [v for v in chunk.split(",") if v]
    return out


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--channels", type=_positive_int, default=48)
    p.add_argument("--layers", type=_positive_int, default=12)
    p.add_argument("--epoch-len", type=_positive_int, default=500)
    p.add_argument("--patience", type=_positive_int, default=30)
    p.add_argument("--max-iters", type=_positive_int, default=100_000)
    p.add_argument("--check-interval", type=_positive_int, default=250, help="n2f-domino validation cadence")
    p.add_argument("--lr", type=float, default=1e-4)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="domino-denoise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("denoise", help="denoise one image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=sorted(MODE_NAMES), default="dd")
    p.add_argument("--fill", choices=("domino",) + tuple(FILLS), default="domino", help="validation pair strategy")
    p.add_argument("--report", help="JSON run report path")
    p.add_argument("--timing", action="store_true", help="include wall_time_s in the report")
    _add_training_flags(p)

    p = sub.add_parser("add-noise", help="synthesize Gaussian or Poisson noise")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("gaussian", "poisson"), default="gaussian")
    p.add_argument("--sigma", type=float)
    p.add_argument("--peak", type=float)
    p.add_argument("--seed", type=_seed, default=0)

    p = sub.add_parser("tile", help="write the even/odd filled images")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-even", required=True)
    p.add_argument("--out-odd", required=True)
    p.add_argument("--dump-tiling", help="CSV of i,j,k,l rows (domino only, padded coordinates)")
    p.add_argument("--dump-parity", choices=("even", "odd"), default="even", help="which tiling to dump")
    p.add_argument("--strategy", choices=("domino",) + tuple(FILLS), default="domino")
    p.add_argument("--seed", type=_seed, default=0)

    p = sub.add_parser("count", help="count domino tilings of an m x n grid")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)

    p = sub.add_parser("benchmark", help="PSNR/SSIM/time table over a directory of clean images")
    p.add_argument("--clean-dir", required=True)
    p.add_argument("--kind", choices=("gaussian", "poisson"), default="gaussian")
    p.add_argument("--sigma", nargs="+", default=["25"], help="noise levels (sigma, or peak for poisson)")
    p.add_argument("--methods", nargs="+", default=["dd"])
    p.add_argument("--out-csv", required=True)
    _add_training_flags(p)
    return parser


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def _config(args, mode: str, fill: str) -> DenoiseConfig:
    return DenoiseConfig(
        epoch_len=args.epoch_len,
        patience=args.patience,
        max_iterations=args.max_iters,
        channels=args.channels,
        seed=args.seed,
        mode=mode,
        n2f_check_interval=args.check_interval,
        n_layers=args.layers,
        lr=args.lr,
        fill=fill,
    )


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def _check_outputs(*paths) -> None:
    for path in paths:
        if path is not None and Path(path).suffix.lower() not in IMAGE_SUFFIXES:
            raise UsageError(f"{path}: output must end in .png or .pgm")


def cmd_denoise(args) -> int:
    if not args.lr > 0:
        raise UsageError("--lr must be positive")
    _check_outputs(args.out)
    cfg = _config(args, MODE_NAMES[args.mode], args.fill)
    img = load_image(args.input)
    out, report = denoise(img, cfg)
    if not args.timing:
        # timings would break byte-identical reruns
        report.pop("wall_time_s", None)
    save_image(Image(out.data, img.bit_depth), args.out)
    if args.report:
        payload = json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n"
        atomic_write_bytes(args.report, payload.encode())
    return EXIT_OK


def cmd_add_noise(args) -> int:
    if args.kind == "gaussian":
        if args.sigma is None:
            raise UsageError("--kind gaussian requires --sigma")
        spec = NoiseSpec("gaussian", sigma=args.sigma, seed=args.seed)
    else:
        if args.peak is None:
            raise UsageError("--kind poisson requires --peak")
        spec = NoiseSpec("poisson", peak=args.peak, seed=args.seed)
    _check_outputs(args.out)
    img = load_image(args.input)
    save_image(Image(add_noise(img, spec), img.bit_depth), args.out)
    return EXIT_OK


def cmd_tile(args) -> int:
    if args.dump_tiling and args.strategy != "domino":
        raise UsageError("--dump-tiling only applies to --strategy domino")
    _check_outputs(args.out_even, args.out_odd)
    img = load_image(args.input)
    if args.strategy == "domino":
        even, odd, t_even, t_odd = pixel_domino_pair(img.data, return_tilings=True)
    else:
        fill = FILLS[args.strategy]
        if args.strategy == "rand":
            even = fill(img.data, Parity.EVEN, seed=subseed(args.seed, "rand-fill-even"))
            odd = fill(img.data, Parity.ODD, seed=subseed(args.seed, "rand-fill-odd"))
        else:
            even, odd = fill(img.data, Parity.EVEN), fill(img.data, Parity.ODD)
    save_image(Image(even, img.bit_depth), args.out_even)
    save_image(Image(odd, img.bit_depth), args.out_odd)
    if args.dump_tiling:
        tiling = t_even if args.dump_parity == "even" else t_odd
        atomic_write_bytes(args.dump_tiling, tiling.to_csv().encode())
    return EXIT_OK


def cmd_count(args) -> int:
    m, n = args.rows, args.cols
    if m < 1 or n < 1:
        raise UsageError("--rows and --cols must be positive")
    try:
        value = count_tilings_formula(m, n)
        formula = str(round(value)) if math.isfinite(value) else "inf"
    except OverflowError:
        formula = "inf"
    parts = [f"formula={formula}"]
    try:
        parts.append(f"exact={count_tilings_exact(m, n)}")
    except SizeLimitError:
        pass
    print(" ".join(parts))
    return EXIT_OK


def _clean_images(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


def _fmt(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf"
    return f"{value:.4f}"


def cmd_benchmark(args) -> int:
    levels = _float_list(args.sigma)
    methods = _name_list(args.methods)
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise UsageError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")
    if not levels or not methods:
        raise UsageError("need at least one noise level and one method")
    if not args.lr > 0:
        raise UsageError("--lr must be positive")
    images = _clean_images(Path(args.clean_dir))
    if not images:
        raise UsageError(f"{args.clean_dir}: no .png/.pgm images")

    rows = []
    for path in images:
        clean = load_image(path)
        for level in levels:
            key = f"noise:{path.name}:{level!r}"
            if args.kind == "gaussian":
                spec = NoiseSpec("gaussian", sigma=level, seed=subseed(args.seed, key))
            else:
                spec = NoiseSpec("poisson", peak=level, seed=subseed(args.seed, key))
            noisy = add_noise(clean, spec)
            for method in methods:
                mode, fill = METHODS[method]
                start = time.perf_counter()
                out, _ = denoise(noisy, _config(args, mode, fill))
                seconds = time.perf_counter() - start
                score = ssim(out.data, clean.data) if min(clean.data.shape) >= 11 else float("nan")
                rows.append((path.name, method, level, psnr(out.data, clean.data), score, seconds))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for name, method, level, p, s, sec in rows:
        writer.writerow([name, method, f"{level:g}", _fmt(p), _fmt(s), f"{sec:.3f}"])
    for method in methods:
        for level in levels:
            sel = [r for r in rows if r[1] == method and r[2] == level]
            mean = [float(np.mean([r[k] for r in sel])) for k in (3, 4, 5)]
            writer.writerow(["mean", method, f"{level:g}", _fmt(mean[0]), _fmt(mean[1]), f"{mean[2]:.3f}"])
    atomic_write_bytes(args.out_csv, buf.getvalue().encode())
    return EXIT_OK


COMMANDS = {
    "denoise": cmd_denoise,
    "add-noise": cmd_add_noise,
    "tile": cmd_tile,
    "count": cmd_count,
    "benchmark": cmd_benchmark,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except NumericalError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
