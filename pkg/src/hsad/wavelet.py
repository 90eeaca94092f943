"""Orthonormal Daubechies filter banks and the periodic 1-D DWT.

Alignment convention (fixed everywhere in this package)::

    approx[k] = sum_j low[j]  * x[(2k + j) mod N]
    detail[k] = sum_j high[j] * x[(2k + j) mod N]

i.e. the filters are applied as correlations, so Haar maps ``[1, 2, 3, 4]``
to approx ``[3, 7] / sqrt(2)`` and detail ``[-1, -1] / sqrt(2)``.  The
high-pass taps follow ``high[n] = (-1)**n * low[len - 1 - n]``.  Under this
convention the analysis matrix is orthogonal, and :func:`idwt_level` is its
transpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from . import _backend
from .cube import HyperCube
from .errors import LengthMismatch, OddLength, TargetTooLarge, TooShort, UnsupportedOrder, WaveletError

__all__ = [
    "MAX_ORDER",
    "WaveletFilterPair",
    "daubechies_filters",
    "dwt_level",
    "idwt_level",
    "pad_to_power_of_two",
    "multilevel_approx",
    "reduce_cube",
]

MAX_ORDER = 10


@dataclass(frozen=True)
class WaveletFilterPair:
    low: np.ndarray
    high: np.ndarray
    order: int

    def __len__(self):
        return len(self.low)


@lru_cache(maxsize=None)
def _daubechies_taps(order: int) -> tuple[float, ...]:
    # Spectral factorisation: |Q(w)|^2 = P(sin^2(w/2)) with
    # P(y) = sum_k C(N-1+k, k) y^k; keep the minimum-phase roots.
    with mpmath.workdps(60):
        n = order
        coeffs = [mpmath.binomial(n - 1 + k, k) for k in range(n)]
        taps = [mpmath.mpf(1)]
        if n > 1:
            # y = (2 - z - 1/z)/4  ->  z^2 - (2 - 4y) z + 1 = 0
            y_roots = mpmath.polyroots(coeffs[::-1], maxsteps=400, extraprec=200)
            for y in y_roots:
                b = 2 - 4 * y
                disc = mpmath.sqrt(b * b - 4)
                z1, z2 = (b + disc) / 2, (b - disc) / 2
                z = z1 if abs(z1) < 1 else z2
                taps = _poly_mul(taps, [mpmath.mpf(1), -z])
        for _ in range(n):
            taps = _poly_mul(taps, [mpmath.mpf(1), mpmath.mpf(1)])
        taps = [mpmath.re(t) for t in taps]
        scale = mpmath.sqrt(2) / mpmath.fsum(taps)
        return tuple(float(t * scale) for t in taps)


def _poly_mul(a, b):
    out = [mpmath.mpf(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def daubechies_filters(order: int = 2) -> WaveletFilterPair:
    """Orthonormal Daubechies filters with ``order`` vanishing moments.

    ``order=1`` is Haar; ``order=2`` is the 4-tap D4 filter.
    """
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_ORDER:
        raise UnsupportedOrder(f"Daubechies order must be an integer in 1..{MAX_ORDER}, got {order!r}")
    low = np.array(_daubechies_taps(int(order)))
    sign = np.where(np.arange(len(low)) % 2 == 0, 1.0, -1.0)
    high = sign * low[::-1]
    low.setflags(write=False)
    high.setflags(write=False)
    return WaveletFilterPair(low=low, high=high, order=int(order))


def _check_signal(signal, filters: WaveletFilterPair) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[-1] % 2:
        raise OddLength(f"signal length {x.shape[-1]} is odd")
    if x.shape[-1] < len(filters):
        raise TooShort(f"signal length {x.shape[-1]} shorter than filter length {len(filters)}")
    return x


def dwt_level(signal, filters: WaveletFilterPair) -> tuple[np.ndarray, np.ndarray]:
    """One analysis stage with periodic extension; works along the last axis."""
    x = _check_signal(signal, filters)
    n = x.shape[-1]
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(len(filters))[None, :]) % n
    windows = x[..., idx]
    return windows @ filters.low, windows @ filters.high


def idwt_level(approx, detail, filters: WaveletFilterPair) -> np.ndarray:
    """Inverse of :func:`dwt_level` (transpose of the orthogonal analysis map)."""
    a = np.asarray(approx, dtype=np.float64)
    d = np.asarray(detail, dtype=np.float64)
    if a.shape != d.shape:
        raise LengthMismatch(f"approx shape {a.shape} != detail shape {d.shape}")
    half = a.shape[-1]
    n = 2 * half
    out = np.zeros(a.shape[:-1] + (n,))
    for j in range(len(filters)):
        pos = (2 * np.arange(half) + j) % n
        # pos values are distinct for a fixed j, so fancy-index accumulation is safe
        out[..., pos] += filters.low[j] * a + filters.high[j] * d
    return out


def _next_pow2(n: int) -> int:
    return 1 << max(n - 1, 0).bit_length()


def pad_to_power_of_two(signal) -> np.ndarray:
    """Half-sample symmetric padding at the end of the last axis up to a power of two."""
    x = np.asarray(signal, dtype=np.float64)
    n = x.shape[-1]
    extra = _next_pow2(n) - n
    if extra == 0:
        return x
    width = [(0, 0)] * (x.ndim - 1) + [(0, extra)]
    return np.pad(x, width, mode="symmetric")


def _check_target(target_len) -> int:
    if not isinstance(target_len, (int, np.integer)) or target_len < 2 or target_len & (target_len - 1):
        raise WaveletError(f"target length must be a power of two >= 2, got {target_len!r}")
    return int(target_len)


def _stage_count(n: int, target_len: int) -> int:
    padded = _next_pow2(n)
    if target_len > padded:
        raise TargetTooLarge(f"target length {target_len} exceeds padded length {padded}")
    return padded.bit_length() - target_len.bit_length()


def multilevel_approx(signal, filters: WaveletFilterPair, target_len: int = 4) -> np.ndarray:
    """Iterate the low-pass branch until ``target_len`` coefficients remain.

    The signal is first padded to the next power of two (see
    :func:`pad_to_power_of_two`); a 189-sample spectrum therefore goes
    through six stages on its way to 4 coefficients.
    """
    target_len = _check_target(target_len)
    x = np.asarray(signal, dtype=np.float64)
    stages = _stage_count(x.shape[-1], target_len)
    x = pad_to_power_of_two(x)
    for _ in range(stages):
        if x.shape[-1] < len(filters):
            raise TooShort(f"cannot reach {target_len} coefficients with a {len(filters)}-tap filter")
        x, _detail = dwt_level(x, filters)
    return x


def reduce_cube(cube: HyperCube, filters: WaveletFilterPair | None = None, target_bands: int = 4,
                backend: str | None = None) -> HyperCube:
    """Replace every pixel spectrum by its ``target_bands`` approximation coefficients."""
    if filters is None:
        filters = daubechies_filters(2)
    target_bands = _check_target(target_bands)
    stages = _stage_count(cube.bands, target_bands)
    padded = pad_to_power_of_two(cube.values.reshape(-1, cube.bands))
    if padded.shape[-1] >> max(stages - 1, 0) < len(filters):
        raise TooShort(f"cannot reach {target_bands} coefficients with a {len(filters)}-tap filter")
    kernels = _backend.get(backend)
    out = kernels.dwt_approx(np.ascontiguousarray(padded), np.ascontiguousarray(filters.low), stages)
    return HyperCube.from_array(out.reshape(cube.lines, cube.samples, target_bands), cube.header.interleave)
