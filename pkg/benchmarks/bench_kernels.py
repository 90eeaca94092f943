"""Time the compiled kernels against the numpy fallback on one scene.

    python benchmarks/bench_kernels.py [--lines 60 --samples 100 --bands 189] [--repeat 3]

Scores from both backends are compared as a sanity check; they agree to
rounding, not bitwise.
"""

import argparse
import time

import numpy as np

from hsad import _backend
from hsad.detect import WindowConfig, detect
from hsad.synth import generate_scene, benchmark_scene_config
from hsad.wavelet import daubechies_filters, reduce_cube


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lines", type=int, default=60)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--bands", type=int, default=189)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--raw", action="store_true", help="also time detectors on the full-band cube (slow)")
    args = ap.parse_args()

    backends = _backend.available()
    if "compiled" not in backends:
        print("compiled backend not built; only the fallback will be timed")
    cube, _ = generate_scene(benchmark_scene_config(args.lines, args.samples, args.bands,
                                                    n_targets=min(16, (args.lines // 12) * (args.samples // 12))))
    filters = daubechies_filters(2)
    cases = [("dwt", None)]
    reduced = reduce_cube(cube, filters, 4)
    inputs = [("dwt", reduced)] + ([("raw", cube)] if args.raw else [])
    for tag, data in inputs:
        for algo, cfg in (("lrx", WindowConfig.single(15)), ("dwrx", WindowConfig.dual(5, 13)),
                          ("dwest", WindowConfig.dual(5, 13))):
            cases.append((f"{algo}:{tag}", (algo, cfg, data)))

    print(f"{'case':<14}" + "".join(f"{b:>12}" for b in backends) + "     speedup  max|diff|")
    for name, spec in cases:
        row, outputs = [], []
        for b in backends:
            if spec is None:
                t, out = best_of(lambda: reduce_cube(cube, filters, 4, backend=b).values, args.repeat)
            else:
                algo, cfg, data = spec
                t, out = best_of(lambda: detect(data, algo, cfg, backend=b).scores, args.repeat)
            row.append(t)
            outputs.append(out)
        speed = row[-1] / row[0] if len(row) == 2 else float("nan")
        diff = float(np.max(np.abs(outputs[0] - outputs[-1])))
        print(f"{name:<14}" + "".join(f"{t:12.4f}" for t in row) + f"{speed:12.1f}  {diff:.2e}")


if __name__ == "__main__":
    main()
