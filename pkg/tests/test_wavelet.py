import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsad.cube import HyperCube, get_pixel_spectrum
from hsad.errors import LengthMismatch, OddLength, TargetTooLarge, TooShort, UnsupportedOrder, WaveletError
from hsad.wavelet import (MAX_ORDER, daubechies_filters, dwt_level, idwt_level, multilevel_approx,
                          pad_to_power_of_two, reduce_cube)
from hsad import _backend

from oracles import circular_dwt

ORDERS = range(1, MAX_ORDER + 1)
SQRT2 = math.sqrt(2.0)


def test_haar_taps():
    f = daubechies_filters(1)
    assert np.allclose(f.low, [1 / SQRT2, 1 / SQRT2], atol=1e-15)
    assert np.allclose(f.high, [1 / SQRT2, -1 / SQRT2], atol=1e-15)


def test_d4_taps_match_closed_form():
    # (1 + sqrt3, 3 + sqrt3, 3 - sqrt3, 1 - sqrt3) / (4 sqrt2)
    s3 = math.sqrt(3.0)
    closed = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * SQRT2)
    f = daubechies_filters(2)
    assert np.max(np.abs(f.low - closed)) < 1e-15
    assert np.allclose(f.low, [0.4829629131, 0.8365163037, 0.2241438680, -0.1294095226], atol=1e-10)
    assert abs(f.low.sum() - SQRT2) < 1e-15 and abs(f.high.sum()) < 1e-15


@pytest.mark.parametrize("order", ORDERS)
def test_filter_admissibility(order):
    f = daubechies_filters(order)
    n = len(f)
    assert n == 2 * order
    assert abs(f.low.sum() - SQRT2) < 1e-12
    assert abs(f.high.sum()) < 1e-12
    for shift in range(0, n, 2):
        dot = np.dot(f.low[shift:], f.low[:n - shift])
        assert abs(dot - (1.0 if shift == 0 else 0.0)) < 1e-12
        assert abs(np.dot(f.low[shift:], f.high[:n - shift])) < 1e-12
        assert abs(np.dot(f.high[shift:], f.low[:n - shift])) < 1e-12
    # vanishing moments of the high-pass branch
    k = np.arange(n, dtype=float)
    for p in range(order):
        assert abs(np.sum(f.high * (k / n) ** p)) < 1e-11
    assert np.array_equal(f.high, np.array([(-1) ** i * f.low[n - 1 - i] for i in range(n)]))


@pytest.mark.parametrize("order", [0, 11, 2.0, -1])
def test_unsupported_orders(order):
    with pytest.raises(UnsupportedOrder):
        daubechies_filters(order)


def test_haar_hand_example():
    a, d = dwt_level([1.0, 2.0, 3.0, 4.0], daubechies_filters(1))
    assert np.allclose(a, [3 / SQRT2, 7 / SQRT2], atol=1e-15)
    assert np.allclose(d, [-1 / SQRT2, -1 / SQRT2], atol=1e-15)


def test_constant_signal_single_level():
    a, d = dwt_level(np.full(8, 1.7), daubechies_filters(2))
    assert np.allclose(a, 1.7 * SQRT2, atol=1e-14)
    assert np.allclose(d, 0.0, atol=1e-14)


def test_haar_inverse_of_constant_approx():
    out = idwt_level(np.full(4, SQRT2 * 0.3), np.zeros(4), daubechies_filters(1))
    assert np.allclose(out, 0.3, atol=1e-15)


def test_round_trip_small_example():
    x = np.arange(1.0, 9.0)
    f = daubechies_filters(2)
    assert np.max(np.abs(idwt_level(*dwt_level(x, f), f) - x)) < 1e-12


def test_errors():
    f = daubechies_filters(2)
    with pytest.raises(OddLength):
        dwt_level(np.ones(7), f)
    with pytest.raises(TooShort):
        dwt_level(np.ones(2), f)
    with pytest.raises(LengthMismatch):
        idwt_level(np.ones(4), np.ones(3), f)
    with pytest.raises(TargetTooLarge):
        multilevel_approx(np.ones(8), f, 16)
    with pytest.raises(WaveletError):
        multilevel_approx(np.ones(8), f, 3)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(list(ORDERS)), st.integers(1, 6).map(lambda k: 2 ** k * 2),
       st.integers(0, 2 ** 32 - 1))
def test_properties_random(order, n, seed):
    f = daubechies_filters(order)
    if n < len(f):
        return
    x = np.random.default_rng(seed).normal(size=n)
    a, d = dwt_level(x, f)
    assert abs(a @ a + d @ d - x @ x) < 1e-10 * max(1.0, x @ x)
    assert np.max(np.abs(idwt_level(a, d, f) - x)) < 1e-10 * max(1.0, np.max(np.abs(x)))
    a2, d2 = dwt_level(idwt_level(a, d, f), f)
    assert np.max(np.abs(a2 - a)) < 1e-10 and np.max(np.abs(d2 - d)) < 1e-10


@pytest.mark.parametrize("order", ORDERS)
def test_matches_convolution_oracle(order):
    f = daubechies_filters(order)
    rng = np.random.default_rng(order)
    for n in (8, 16, 32, 64):
        if n < len(f):
            continue
        x = rng.normal(size=n)
        a, d = dwt_level(x, f)
        ra, rd = circular_dwt(x, f.low, f.high)
        assert np.max(np.abs(a - ra)) < 1e-12 and np.max(np.abs(d - rd)) < 1e-12


def test_batched_rows_equal_single_rows():
    f = daubechies_filters(3)
    x = np.random.default_rng(0).normal(size=(5, 32))
    a, d = dwt_level(x, f)
    for i in range(5):
        ai, di = dwt_level(x[i], f)
        assert np.max(np.abs(a[i] - ai)) < 1e-14 and np.max(np.abs(d[i] - di)) < 1e-14


def test_padding_rule():
    x = np.arange(5.0)
    assert pad_to_power_of_two(x).tolist() == [0, 1, 2, 3, 4, 4, 3, 2]
    assert pad_to_power_of_two(np.arange(8.0)).tolist() == list(range(8))
    assert pad_to_power_of_two(np.ones(189)).shape == (256,)


def test_multilevel_constant_scaling():
    out = multilevel_approx(np.full(64, 0.5), daubechies_filters(2), 4)
    assert np.allclose(out, 0.5 * 4, atol=1e-13)  # four stages of sqrt(2)
    out = multilevel_approx(np.full(189, 0.5), daubechies_filters(2), 4)
    assert np.allclose(out, 0.5 * SQRT2 ** 6, atol=1e-13)  # 189 -> 256 -> six stages


def test_multilevel_stage_count_by_construction():
    f = daubechies_filters(2)
    x = np.random.default_rng(4).normal(size=189)
    y = pad_to_power_of_two(x)
    assert y.shape == (256,)
    for _ in range(6):
        y, _ = dwt_level(y, f)
    assert np.array_equal(multilevel_approx(x, f, 4), y)


@pytest.mark.parametrize("backend", _backend.available())
def test_reduce_cube_per_pixel(backend):
    rng = np.random.default_rng(9)
    cube = HyperCube.from_array(rng.normal(size=(6, 10, 64)))
    f = daubechies_filters(2)
    reduced = reduce_cube(cube, f, 4, backend=backend)
    assert reduced.shape == (6, 10, 4)
    for r, c in [(0, 0), (5, 9), (2, 7), (3, 3)]:
        ref = multilevel_approx(get_pixel_spectrum(cube, r, c), f, 4)
        assert np.max(np.abs(get_pixel_spectrum(reduced, r, c) - ref)) < 1e-13


def test_reduce_constant_cube():
    cube = HyperCube.from_array(np.full((3, 4, 64), 1.25))
    out = reduce_cube(cube)
    assert out.shape == (3, 4, 4)
    assert np.allclose(out.values, 5.0, atol=1e-13)


def test_reduce_backends_agree():
    if len(_backend.available()) < 2:
        pytest.skip("compiled backend not built")
    cube = HyperCube.from_array(np.random.default_rng(2).normal(size=(7, 5, 189)))
    outs = [reduce_cube(cube, daubechies_filters(2), 4, backend=b).values for b in _backend.available()]
    assert np.max(np.abs(outs[0] - outs[1])) < 1e-13


def test_reduce_short_filter_chain():
    cube = HyperCube.from_array(np.ones((1, 1, 16)))
    with pytest.raises(TooShort):
        reduce_cube(cube, daubechies_filters(4), 2)
