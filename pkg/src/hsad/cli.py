"""Command-line front end.

Every command writes a ``<prefix>.manifest.json`` next to its outputs.  The
manifest holds the fully resolved argument list, input checksums, per-stage
wall-clock times and output paths; ``hsad replay`` re-runs a manifest.

Exit statuses: 0 success, 1 input/config error, 2 usage/consistency error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .cube import load_cube, save_cube
from .detect import Algorithm, WindowConfig, detect, load_scores, save_scores
from .errors import (ConfigMismatch, DegenerateTruth, DimensionMismatch, HsadError, NumericalError,
                     OutOfBoundsImplant)
from .evaluate import adaptive_threshold, format_roc_csv, render_pgm, roc_curve
from .stats import DEFAULT_RIDGE
from .synth import SceneConfig, generate_scene, benchmark_scene_config, read_pgm_mask, write_pgm_mask
from .wavelet import daubechies_filters, reduce_cube

log = logging.getLogger("hsad")

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

BENCH_HEADER = ["algorithm", "preprocessing", "window", "auc", "preprocess_seconds", "detect_seconds",
                "total_seconds"]

PRESETS = {
    # implanted-target accuracy scene, dual windows 5/13
    "img1": dict(lines=60, samples=100, bands=189, n_targets=16, seed=2012),
    # runtime scene, dual windows 3/13
    "img2": dict(lines=100, samples=100, bands=189, n_targets=38, seed=2013),
}


class CommandError(Exception):
    def __init__(self, message, status):
        super().__init__(message)
        self.status = status


def _suffixed(prefix, suffix) -> Path:
    prefix = Path(prefix)
    return prefix.with_name(prefix.name + suffix)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _cube_files(path):
    path = Path(path)
    prefix = path.with_suffix("") if path.suffix.lower() in (".hdr", ".img") else path
    return [_suffixed(prefix, ".hdr"), _suffixed(prefix, ".img")]


def _write_manifest(prefix, command, argv, inputs, params, durations, outputs, extra=None) -> Path:
    manifest = {
        "tool": "hsad",
        "version": __version__,
        "command": command,
        "argv": argv,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "parameters": params,
        "durations_seconds": durations,
        "outputs": [str(p) for p in outputs],
    }
    if extra:
        manifest.update(extra)
    path = _suffixed(prefix, ".manifest.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _ensure_parent(prefix):
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)


def _window_from_args(algo: Algorithm, args) -> WindowConfig:
    single = args.window is not None
    dual = args.inner is not None or args.outer is not None
    if algo is Algorithm.LRX:
        if dual:
            raise CommandError("lrx takes --window, not --inner/--outer", EXIT_USAGE)
        return WindowConfig.single(args.window if single else 15)
    if single:
        raise CommandError(f"{algo.value} takes --inner/--outer, not --window", EXIT_USAGE)
    return WindowConfig.dual(args.inner if args.inner is not None else 5,
                             args.outer if args.outer is not None else 13)


def _window_flags(config: WindowConfig):
    if config.mode == "single":
        return ["--window", str(config.single_size)]
    return ["--inner", str(config.inner_size), "--outer", str(config.outer_size)]


# -- commands --------------------------------------------------------------

def cmd_preset(args):
    config = benchmark_scene_config(**PRESETS[args.name])
    Path(args.output).write_text(config.to_text())
    print(args.output)


def cmd_generate(args):
    try:
        config = SceneConfig.load(args.config)
    except (OSError, KeyError, ValueError) as exc:
        raise CommandError(f"cannot read scene config {args.config}: {exc}", EXIT_INPUT) from exc
    _ensure_parent(args.output)
    start = time.perf_counter()
    try:
        cube, mask = generate_scene(config)
    except (OutOfBoundsImplant, HsadError, ValueError, OSError) as exc:
        raise CommandError(str(exc), EXIT_INPUT) from exc
    elapsed = time.perf_counter() - start
    hdr, img = save_cube(args.output, cube, args.interleave)
    truth = _suffixed(args.output, "_truth.pgm")
    write_pgm_mask(truth, mask)
    argv = ["generate", str(args.config), str(args.output), "--interleave", args.interleave]
    params = {"seed": config.seed, "lines": config.lines, "samples": config.samples, "bands": config.bands,
              "implants": len(config.implants), "truth_pixels": int(mask.sum()), "interleave": args.interleave}
    inputs = [args.config]
    if config.background.kind == "cube":
        inputs += _cube_files(config.background.donor)
    _write_manifest(args.output, "generate", argv, inputs, params, {"generate": elapsed}, [hdr, img, truth])
    log.info("wrote %s (%d truth pixels)", hdr, mask.sum())


def _load_cube_or_fail(path):
    try:
        return load_cube(path)
    except (OSError, HsadError) as exc:
        raise CommandError(f"cannot read cube {path}: {exc}", EXIT_INPUT) from exc


def cmd_reduce(args):
    cube = _load_cube_or_fail(args.input)
    try:
        filters = daubechies_filters(args.wavelet_order)
        start = time.perf_counter()
        reduced = reduce_cube(cube, filters, args.target_bands, backend=args.backend)
        elapsed = time.perf_counter() - start
    except HsadError as exc:
        raise CommandError(str(exc), EXIT_INPUT) from exc
    _ensure_parent(args.output)
    hdr, img = save_cube(args.output, reduced, cube.header.interleave)
    argv = ["reduce", str(args.input), str(args.output), "--wavelet-order", str(args.wavelet_order),
            "--target-bands", str(args.target_bands), "--backend", _backend.get(args.backend).NAME]
    params = {"wavelet_order": args.wavelet_order, "target_bands": args.target_bands,
              "input_bands": cube.bands, "backend": _backend.get(args.backend).NAME}
    _write_manifest(args.output, "reduce", argv, _cube_files(args.input), params, {"dwt": elapsed}, [hdr, img])


def cmd_detect(args):
    algo = Algorithm(args.algo)
    try:
        config = _window_from_args(algo, args)
    except ConfigMismatch as exc:
        raise CommandError(str(exc), EXIT_USAGE) from exc
    cube = _load_cube_or_fail(args.input)
    try:
        result = detect(cube, algo, config, ridge=args.ridge, eigen_fraction=args.eigen_fraction,
                        workers=args.workers, backend=args.backend)
    except NumericalError as exc:
        raise CommandError(str(exc), EXIT_NUMERICAL) from exc
    except ConfigMismatch as exc:
        raise CommandError(str(exc), EXIT_USAGE) from exc
    _ensure_parent(args.output)
    hdr, img = save_scores(args.output, result)
    pgm = _suffixed(args.output, ".pgm")
    pgm.write_bytes(render_pgm(result))
    argv = ["detect", str(args.input), str(args.output), "--algo", algo.value, *_window_flags(config),
            "--ridge", repr(args.ridge), "--eigen-fraction", repr(args.eigen_fraction),
            "--workers", str(args.workers), "--backend", _backend.get(args.backend).NAME]
    params = {"algorithm": algo.value, "window": config.describe(), "ridge": args.ridge,
              "eigen_fraction": args.eigen_fraction, "workers": args.workers, "bands": cube.bands,
              "backend": _backend.get(args.backend).NAME}
    _write_manifest(args.output, "detect", argv, _cube_files(args.input), params,
                    {"detect": result.seconds}, [hdr, img, pgm])


def cmd_evaluate(args):
    try:
        scores = load_scores(args.scores)
        truth = read_pgm_mask(args.truth)
    except (OSError, HsadError, ValueError) as exc:
        raise CommandError(f"cannot read inputs: {exc}", EXIT_INPUT) from exc
    start = time.perf_counter()
    try:
        curve = roc_curve(scores, truth)
    except DimensionMismatch as exc:
        raise CommandError(str(exc), EXIT_USAGE) from exc
    except DegenerateTruth as exc:
        raise CommandError(str(exc), EXIT_INPUT) from exc
    thresh = adaptive_threshold(scores, args.z_alpha)
    elapsed = time.perf_counter() - start
    _ensure_parent(args.output)
    roc_path = _suffixed(args.output, "_roc.csv")
    roc_path.write_text(format_roc_csv(curve))
    mask_path = _suffixed(args.output, "_threshold.pgm")
    write_pgm_mask(mask_path, thresh.mask)
    argv = ["evaluate", str(args.scores), str(args.truth), str(args.output), "--z-alpha", repr(args.z_alpha)]
    params = {"z_alpha": args.z_alpha, "tau": thresh.tau, "auc": curve.auc,
              "declared_anomalies": int(thresh.mask.sum())}
    _write_manifest(args.output, "evaluate", argv, _cube_files(args.scores) + [args.truth], params,
                    {"evaluate": elapsed}, [roc_path, mask_path])
    print(f"auc={curve.auc:.6f} tau={thresh.tau:.6g} declared={int(thresh.mask.sum())}")


def _parse_cells(text):
    """Parse ``algo[:raw|dwt[:window]]`` items, e.g. ``lrx:dwt``, ``dwrx:raw:3/13``."""
    cells = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) > 3:
            raise CommandError(f"bench cell {item!r}: expected algo[:pre[:window]]", EXIT_USAGE)
        algo_name, pre, window = parts + ["raw", ""][len(parts) - 1:]
        if pre not in ("raw", "dwt"):
            raise CommandError(f"bench cell {item!r}: preprocessing must be raw or dwt", EXIT_USAGE)
        try:
            algo = Algorithm(algo_name)
        except ValueError:
            raise CommandError(f"bench cell {item!r}: unknown algorithm {algo_name!r}", EXIT_USAGE) from None
        config = None
        if window:
            try:
                sizes = [int(v) for v in window.split("/")]
                config = WindowConfig.single(*sizes) if len(sizes) == 1 else WindowConfig.dual(*sizes)
            except (ValueError, TypeError, ConfigMismatch) as exc:
                raise CommandError(f"bench cell {item!r}: bad window: {exc}", EXIT_USAGE) from None
            if (config.mode == "single") != (algo is Algorithm.LRX):
                raise CommandError(f"bench cell {item!r}: window does not fit {algo.value}", EXIT_USAGE)
        cells.append((algo, pre, config))
    return cells


def run_bench(cube, truth, cells, single: WindowConfig, dual: WindowConfig, ridge=DEFAULT_RIDGE,
              eigen_fraction=0.1, wavelet_order=2, target_bands=4, workers=1, backend=None):
    """Run ``(algorithm, preprocessing, window or None)`` cells on one scene.

    Cells without a window use ``single`` or ``dual``.

    The wavelet reduction runs once; its time is reported as
    ``preprocess_seconds`` on, and added to the total of, every ``dwt`` cell.
    """
    rows = []
    reduced = None
    dwt_seconds = 0.0
    if any(cell[1] == "dwt" for cell in cells):
        start = time.perf_counter()
        reduced = reduce_cube(cube, daubechies_filters(wavelet_order), target_bands, backend=backend)
        dwt_seconds = time.perf_counter() - start
    for algo, pre, config in cells:
        config = config or (single if algo is Algorithm.LRX else dual)
        data = reduced if pre == "dwt" else cube
        row = {"algorithm": algo.value, "preprocessing": pre, "window": config.describe()}
        try:
            result = detect(data, algo, config, ridge=ridge, eigen_fraction=eigen_fraction, workers=workers,
                            backend=backend)
            auc_value = roc_curve(result, truth).auc if truth is not None else math.nan
            pre_s = dwt_seconds if pre == "dwt" else 0.0
            row.update(auc=auc_value, preprocess_seconds=pre_s, detect_seconds=result.seconds,
                       total_seconds=pre_s + result.seconds, error="")
        except (HsadError, ValueError) as exc:
            row.update(auc=math.nan, preprocess_seconds=math.nan, detect_seconds=math.nan,
                       total_seconds=math.nan, error=str(exc))
        rows.append(row)
    return rows


def format_bench_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_HEADER)
    for row in rows:
        writer.writerow([row["algorithm"], row["preprocessing"], row["window"], f"{row['auc']:.6f}",
                         f"{row['preprocess_seconds']:.6f}", f"{row['detect_seconds']:.6f}",
                         f"{row['total_seconds']:.6f}"])
    return buf.getvalue()


def cmd_bench(args):
    cells = _parse_cells(args.cells)
    try:
        config = SceneConfig.load(args.config)
        cube, truth = generate_scene(config)
    except (OSError, KeyError, ValueError, HsadError) as exc:
        raise CommandError(f"cannot build scene from {args.config}: {exc}", EXIT_INPUT) from exc
    if not truth.any():
        truth = None
    single = WindowConfig.single(args.window)
    dual = WindowConfig.dual(args.inner, args.outer)
    rows = run_bench(cube, truth, cells, single, dual, ridge=args.ridge, eigen_fraction=args.eigen_fraction,
                     wavelet_order=args.wavelet_order, target_bands=args.target_bands, workers=args.workers,
                     backend=args.backend)
    text = format_bench_csv(rows)
    _ensure_parent(args.output)
    out = _suffixed(args.output, ".csv")
    out.write_text(text)
    sys.stdout.write(text)
    argv = ["bench", str(args.config), str(args.output), "--cells", args.cells, "--window", str(args.window),
            "--inner", str(args.inner), "--outer", str(args.outer), "--ridge", repr(args.ridge),
            "--eigen-fraction", repr(args.eigen_fraction), "--wavelet-order", str(args.wavelet_order),
            "--target-bands", str(args.target_bands), "--workers", str(args.workers),
            "--backend", _backend.get(args.backend).NAME]
    params = {"cells": [f"{a.value}:{p}" + (f":{w.describe()}" if w else "") for a, p, w in cells], "workers": args.workers,
              "backend": _backend.get(args.backend).NAME, "seed": config.seed}
    keys = [f"{i}:{r['algorithm']}:{r['preprocessing']}:{r['window']}" for i, r in enumerate(rows)]
    durations = {k: {"preprocess": r["preprocess_seconds"], "detect": r["detect_seconds"]}
                 for k, r in zip(keys, rows)}
    errors = {k: r["error"] for k, r in zip(keys, rows) if r["error"]}
    _write_manifest(args.output, "bench", argv, [args.config], params, durations, [out],
                    extra={"errors": errors} if errors else None)


def cmd_replay(args):
    manifest = json.loads(Path(args.manifest).read_text())
    argv = list(manifest["argv"])
    if args.output_prefix:
        # every command's output prefix is its last positional argument
        positional = [i for i, a in enumerate(argv) if i > 0 and not a.startswith("--")
                      and not argv[i - 1].startswith("--")]
        argv[positional[-1]] = str(args.output_prefix)
    return main(argv)


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hsad {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", help="write a built-in scene config")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("output")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("generate", help="render a synthetic scene and its truth mask")
    p.add_argument("config")
    p.add_argument("output", help="output prefix")
    p.add_argument("--interleave", choices=["bsq", "bil", "bip"], default="bsq")
    p.set_defaults(func=cmd_generate)

    backend_help = f"kernel backend ({', '.join(_backend.available())}; default {_backend.DEFAULT})"

    p = sub.add_parser("reduce", help="replace spectra by their wavelet approximation coefficients")
    p.add_argument("input")
    p.add_argument("output", help="output prefix")
    p.add_argument("--wavelet-order", type=int, default=2)
    p.add_argument("--target-bands", type=int, default=4)
    p.add_argument("--backend", default=None, help=backend_help)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("detect", help="run one anomaly detector")
    p.add_argument("input")
    p.add_argument("output", help="output prefix")
    p.add_argument("--algo", choices=[a.value for a in Algorithm], required=True)
    p.add_argument("--window", type=int, default=None, help="LRX window size (default 15)")
    p.add_argument("--inner", type=int, default=None, help="dual inner window (default 5)")
    p.add_argument("--outer", type=int, default=None, help="dual outer window (default 13)")
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--eigen-fraction", type=float, default=0.1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--backend", default=None, help=backend_help)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="ROC/AUC against a truth mask plus adaptive thresholding")
    p.add_argument("scores", help="score map prefix or .hdr")
    p.add_argument("truth", help="truth mask (.pgm)")
    p.add_argument("output", help="output prefix")
    p.add_argument("--z-alpha", type=float, default=1.645)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="accuracy/runtime table over detector x preprocessing cells")
    p.add_argument("config")
    p.add_argument("output", help="output prefix (writes <prefix>.csv)")
    p.add_argument("--cells", default="lrx:raw,lrx:dwt,dwrx:raw,dwrx:dwt,dwest:raw,dwest:dwt")
    p.add_argument("--window", type=int, default=15)
    p.add_argument("--inner", type=int, default=5)
    p.add_argument("--outer", type=int, default=13)
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--eigen-fraction", type=float, default=0.1)
    p.add_argument("--wavelet-order", type=int, default=2)
    p.add_argument("--target-bands", type=int, default=4)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--backend", default=None, help=backend_help)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--output-prefix", default=None)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        status = args.func(args)
    except CommandError as exc:
        print(f"hsad {args.command}: error: {exc}", file=sys.stderr)
        return exc.status
    except ConfigMismatch as exc:
        print(f"hsad {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"hsad {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return status or EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
