"""Sliding-window anomaly detectors: Local RX, dual-window RX and DWEST.

All three share the same neighbourhood geometry.  The image is extended at
its borders by whole-sample mirroring (``numpy.pad(mode="reflect")``) so
every pixel sees full windows and constant sample counts:

* Local RX: the ``size x size`` box around the pixel minus the pixel itself.
* Dual window: the ``inner x inner`` box, and the annulus between it and the
  ``outer x outer`` box.

Before scoring, the cube's global mean spectrum is subtracted.  Every score
is invariant to that shift; it only keeps the running moment sums small.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import _backend
from .cube import CubeHeader, HyperCube, format_envi_header, parse_envi_header, read_cube
from .errors import ConfigMismatch, DimensionMismatch, NoConvergence, SingularAfterRidge
from .stats import DEFAULT_RIDGE

__all__ = [
    "Algorithm",
    "WindowConfig",
    "DwestConfig",
    "ScoreMap",
    "BLOCK_ROWS",
    "dual_window_samples",
    "local_rx",
    "dwrx",
    "dwest",
    "detect",
    "save_scores",
    "load_scores",
]

# Rows per work unit.  Fixed so the output never depends on the worker count.
BLOCK_ROWS = 16

# Covariances whose trace is below this fraction of the cube's mean square
# value are treated as exactly zero.
ZERO_TOL = 1e-12


class Algorithm(str, Enum):
    LRX = "lrx"
    DWRX = "dwrx"
    DWEST = "dwest"


@dataclass(frozen=True)
class WindowConfig:
    mode: str
    single_size: int | None = None
    inner_size: int | None = None
    outer_size: int | None = None

    def __post_init__(self):
        if self.mode == "single":
            s = self.single_size
            if not isinstance(s, (int, np.integer)) or s < 3 or s % 2 == 0:
                raise ConfigMismatch(f"single window size must be an odd integer >= 3, got {s!r}")
        elif self.mode == "dual":
            i, o = self.inner_size, self.outer_size
            for name, v in (("inner", i), ("outer", o)):
                if not isinstance(v, (int, np.integer)) or v < 1 or v % 2 == 0:
                    raise ConfigMismatch(f"{name} window size must be an odd positive integer, got {v!r}")
            if o - i < 2:
                raise ConfigMismatch(f"outer window ({o}) must exceed inner window ({i}) by at least 2")
        else:
            raise ConfigMismatch(f"unknown window mode {self.mode!r}")

    @classmethod
    def single(cls, size: int = 15) -> "WindowConfig":
        return cls("single", single_size=size)

    @classmethod
    def dual(cls, inner: int = 5, outer: int = 13) -> "WindowConfig":
        return cls("dual", inner_size=inner, outer_size=outer)

    @property
    def pad(self) -> int:
        return (self.single_size if self.mode == "single" else self.outer_size) // 2

    def describe(self) -> str:
        if self.mode == "single":
            return f"{self.single_size}"
        return f"{self.inner_size}/{self.outer_size}"


@dataclass(frozen=True)
class DwestConfig:
    eigen_fraction: float = 0.1

    def __post_init__(self):
        if not 0 < self.eigen_fraction <= 1:
            raise ConfigMismatch(f"eigen_fraction must lie in (0, 1], got {self.eigen_fraction!r}")


@dataclass
class ScoreMap:
    scores: np.ndarray
    algorithm: str
    window: WindowConfig | None = None
    params: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def shape(self):
        return self.scores.shape


def _mirror_index(i: int, n: int) -> int:
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i %= period
    return i if i < n else period - i


def dual_window_samples(cube: HyperCube, row: int, col: int, config: WindowConfig):
    """Explicit ``(inner, outer)`` sample arrays for one pixel (annulus for outer)."""
    if config.mode != "dual":
        raise ConfigMismatch("dual_window_samples needs a dual window config")
    hi, ho = config.inner_size // 2, config.outer_size // 2
    inner, outer = [], []
    for dr in range(-ho, ho + 1):
        for dc in range(-ho, ho + 1):
            spectrum = cube.values[_mirror_index(row + dr, cube.lines), _mirror_index(col + dc, cube.samples)]
            (inner if abs(dr) <= hi and abs(dc) <= hi else outer).append(spectrum)
    return np.array(inner), np.array(outer)


def _prepare(cube: HyperCube, pad: int):
    values = cube.values
    scale = float(np.mean(values * values))
    centered = values - values.mean(axis=(0, 1))
    modes = ["reflect" if n > 1 else "symmetric" for n in centered.shape[:2]]
    padded = centered
    for axis, mode in enumerate(modes):
        width = [(0, 0)] * 3
        width[axis] = (pad, pad)
        padded = np.pad(padded, width, mode=mode)
    return np.ascontiguousarray(padded), ZERO_TOL * scale


def _run_blocks(cube: HyperCube, pad: int, kernel, args, workers: int, error_cls, message: str):
    padded, tol = _prepare(cube, pad)
    lines, ncols = cube.lines, cube.samples
    out = np.zeros((lines, ncols))
    starts = list(range(0, lines, BLOCK_ROWS))

    def run(r0):
        r1 = min(r0 + BLOCK_ROWS, lines)
        return kernel(padded, r0, r1, ncols, pad, *args(tol), out[r0:r1])

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            status = list(pool.map(run, starts))
    else:
        status = [run(r0) for r0 in starts]
    for r0, bad in zip(starts, status):
        if bad >= 0:
            raise error_cls(message, pixel=(r0 + bad // ncols, bad % ncols))
    return out


def local_rx(cube: HyperCube, config: WindowConfig | None = None, ridge: float = DEFAULT_RIDGE,
             workers: int = 1, backend: str | None = None) -> ScoreMap:
    """Local RX: Mahalanobis distance of each pixel from its window background."""
    config = config or WindowConfig.single(15)
    if config.mode != "single":
        raise ConfigMismatch("local RX needs a single window config")
    kernels = _backend.get(backend)
    start = time.perf_counter()
    scores = _run_blocks(cube, config.pad, kernels.lrx_rows,
                         lambda tol: (config.single_size, ridge, tol), workers,
                         SingularAfterRidge, "background covariance singular after ridge")
    return ScoreMap(scores, Algorithm.LRX.value, config, {"ridge": ridge}, time.perf_counter() - start)


def dwrx(cube: HyperCube, config: WindowConfig | None = None, ridge: float = DEFAULT_RIDGE,
         workers: int = 1, backend: str | None = None) -> ScoreMap:
    """Dual-window RX: ``|m_diff^T C_outer^-1 m_diff|`` with the annulus as outer window."""
    config = config or WindowConfig.dual(5, 13)
    if config.mode != "dual":
        raise ConfigMismatch("DWRX needs a dual window config")
    kernels = _backend.get(backend)
    start = time.perf_counter()
    scores = _run_blocks(cube, config.pad, kernels.dwrx_rows,
                         lambda tol: (config.inner_size, config.outer_size, ridge, tol), workers,
                         SingularAfterRidge, "outer covariance singular after ridge")
    return ScoreMap(scores, Algorithm.DWRX.value, config, {"ridge": ridge}, time.perf_counter() - start)


def dwest(cube: HyperCube, config: WindowConfig | None = None, dcfg: DwestConfig | None = None,
          workers: int = 1, backend: str | None = None) -> ScoreMap:
    """Dual-window eigen separation transform.

    The mean difference of the two windows is projected onto the
    eigenvectors of ``C_inner - C_outer`` whose eigenvalues are positive and
    at least ``eigen_fraction`` times the largest one; the score is the
    absolute value of the summed projections.
    """
    config = config or WindowConfig.dual(5, 13)
    dcfg = dcfg or DwestConfig()
    if config.mode != "dual":
        raise ConfigMismatch("DWEST needs a dual window config")
    kernels = _backend.get(backend)
    start = time.perf_counter()
    scores = _run_blocks(cube, config.pad, kernels.dwest_rows,
                         lambda tol: (config.inner_size, config.outer_size, dcfg.eigen_fraction, tol), workers,
                         NoConvergence, "eigendecomposition failed")
    return ScoreMap(scores, Algorithm.DWEST.value, config, {"eigen_fraction": dcfg.eigen_fraction},
                    time.perf_counter() - start)


def detect(cube: HyperCube, algorithm, config: WindowConfig | None = None, *, ridge: float = DEFAULT_RIDGE,
           eigen_fraction: float = 0.1, workers: int = 1, backend: str | None = None) -> ScoreMap:
    """Dispatch to one detector by name; the result carries its wall-clock time."""
    algorithm = Algorithm(algorithm)
    expected = "single" if algorithm is Algorithm.LRX else "dual"
    if config is None:
        config = WindowConfig.single(15) if expected == "single" else WindowConfig.dual(5, 13)
    if config.mode != expected:
        raise ConfigMismatch(f"{algorithm.value} needs a {expected} window, got {config.mode}")
    if algorithm is Algorithm.LRX:
        return local_rx(cube, config, ridge, workers, backend)
    if algorithm is Algorithm.DWRX:
        return dwrx(cube, config, ridge, workers, backend)
    return dwest(cube, config, DwestConfig(eigen_fraction), workers, backend)


def _with(prefix, suffix):
    prefix = Path(prefix)
    return prefix.with_name(prefix.name + suffix)


def save_scores(prefix, scores) -> tuple[Path, Path]:
    """Write ``<prefix>.hdr`` and ``<prefix>.img`` (float32 little-endian, one band)."""
    grid = scores.scores if isinstance(scores, ScoreMap) else np.asarray(scores)
    lines, samples = grid.shape
    header = CubeHeader(samples=samples, lines=lines, bands=1, interleave="bsq", data_type_code=4, byte_order=0)
    hdr, img = _with(prefix, ".hdr"), _with(prefix, ".img")
    hdr.write_text(format_envi_header(header))
    img.write_bytes(np.ascontiguousarray(grid, dtype="<f4").tobytes())
    return hdr, img


def load_scores(prefix) -> np.ndarray:
    prefix = Path(prefix)
    if prefix.suffix.lower() in (".hdr", ".img"):
        prefix = prefix.with_suffix("")
    header = parse_envi_header(_with(prefix, ".hdr").read_text())
    if header.bands != 1:
        raise DimensionMismatch(f"score map must have one band, header says {header.bands}")
    return read_cube(header, _with(prefix, ".img").read_bytes()).values[:, :, 0]
