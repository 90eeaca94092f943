import numpy as np
import pytest

from hsad import _backend
from hsad.cube import HyperCube
from hsad.detect import (BLOCK_ROWS, Algorithm, DwestConfig, WindowConfig, detect, dual_window_samples, dwest,
                         dwrx, load_scores, local_rx, save_scores)
from hsad.errors import ConfigMismatch, SingularAfterRidge

from oracles import naive_dwest, naive_dwrx, naive_lrx

BACKENDS = _backend.available()


@pytest.fixture(scope="module")
def small_cube():
    rng = np.random.default_rng(2024)
    return HyperCube.from_array(rng.normal(size=(10, 10, 4)) + np.array([5.0, -1.0, 0.5, 2.0]))


@pytest.mark.parametrize("backend", BACKENDS)
def test_lrx_oracle(small_cube, backend):
    for size in (5, 7):
        ref = naive_lrx(small_cube.values, size)
        got = local_rx(small_cube, WindowConfig.single(size), backend=backend).scores
        assert np.max(np.abs(got - ref)) < 1e-10


@pytest.mark.parametrize("backend", BACKENDS)
def test_lrx_oracle_tiny_window_relative(small_cube, backend):
    # 8 background samples for 4 bands: scores reach 1e7, so compare relatively
    ref = naive_lrx(small_cube.values, 3)
    got = local_rx(small_cube, WindowConfig.single(3), backend=backend).scores
    assert np.max(np.abs(got - ref) / ref) < 1e-8


@pytest.mark.parametrize("backend", BACKENDS)
def test_dual_oracles(small_cube, backend):
    for inner, outer in ((1, 5), (3, 7), (3, 9)):
        cfg = WindowConfig.dual(inner, outer)
        assert np.max(np.abs(dwrx(small_cube, cfg, backend=backend).scores
                             - naive_dwrx(small_cube.values, inner, outer))) < 1e-10
        assert np.max(np.abs(dwest(small_cube, cfg, backend=backend).scores
                             - naive_dwest(small_cube.values, inner, outer))) < 1e-10


def _ring_cube(center, ring):
    """3x3 cube whose centre pixel sees exactly ``ring`` (8 spectra) as neighbours."""
    values = np.zeros((3, 3, len(center)))
    cells = [(r, c) for r in range(3) for c in range(3) if (r, c) != (1, 1)]
    for (r, c), spec in zip(cells, ring):
        values[r, c] = spec
    values[1, 1] = center
    return HyperCube.from_array(values)


def _unit_ring():
    a = np.sqrt(2.0)
    return [(a, 0), (-a, 0), (0, a), (0, -a)] * 2  # mean 0, ML covariance I


@pytest.mark.parametrize("backend", BACKENDS)
def test_lrx_hand_quadratic_form(backend):
    cube = _ring_cube([3.0, 4.0], _unit_ring())
    score = local_rx(cube, WindowConfig.single(3), ridge=0.0, backend=backend).scores[1, 1]
    assert score == pytest.approx(25.0, abs=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_dwrx_hand_quadratic_form(backend):
    cube = _ring_cube([1.0, 2.0], _unit_ring())
    score = dwrx(cube, WindowConfig.dual(1, 3), ridge=0.0, backend=backend).scores[1, 1]
    assert score == pytest.approx(5.0, abs=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_dwest_hand_eigen_case(backend):
    # inner 3x3: band 0 has variance 1 around 3, band 1 is 4; annulus: band 0 is 0,
    # band 1 alternates +-1.  So C_diff = diag(1, -1) and m_diff = [3, 4].
    values = np.zeros((5, 5, 2))
    a = 3.0 / np.sqrt(8.0)
    offsets = [a, -a, a, -a, 0.0, a, -a, a, -a]
    k = 0
    for r in range(1, 4):
        for c in range(1, 4):
            values[r, c] = (3.0 + offsets[k], 4.0)
            k += 1
    ring = [(r, c) for r in range(5) for c in range(5) if not (1 <= r <= 3 and 1 <= c <= 3)]
    for i, (r, c) in enumerate(ring):
        values[r, c] = (0.0, 1.0 if i % 2 == 0 else -1.0)
    cube = HyperCube.from_array(values)
    inner, outer = dual_window_samples(cube, 2, 2, WindowConfig.dual(3, 5))
    c_in = np.cov(inner.T, bias=True)
    c_out = np.cov(outer.T, bias=True)
    assert np.allclose(c_in - c_out, np.diag([1.0, -1.0]), atol=1e-14)
    score = dwest(cube, WindowConfig.dual(3, 5), DwestConfig(0.1), backend=backend).scores[2, 2]
    assert score == pytest.approx(3.0, abs=1e-12)


def test_window_counts():
    cube = HyperCube.from_array(np.random.default_rng(0).normal(size=(6, 7, 2)))
    for (i, o), counts in {(5, 13): (25, 144), (3, 13): (9, 160), (1, 3): (1, 8)}.items():
        inner, outer = dual_window_samples(cube, 0, 6, WindowConfig.dual(i, o))
        assert (len(inner), len(outer)) == counts
    inner, outer = dual_window_samples(cube, 3, 3, WindowConfig.dual(1, 3))
    assert np.array_equal(inner[0], cube.values[3, 3])
    assert {tuple(x) for x in outer} == {tuple(cube.values[3 + a, 3 + b]) for a in (-1, 0, 1) for b in (-1, 0, 1)
                                        if (a, b) != (0, 0)}


@pytest.mark.parametrize("backend", BACKENDS)
def test_constant_cube_scores_zero(backend):
    cube = HyperCube.from_array(np.full((9, 8, 5), 3.25))
    for algo in Algorithm:
        cfg = WindowConfig.single(5) if algo is Algorithm.LRX else WindowConfig.dual(3, 7)
        assert not detect(cube, algo, cfg, backend=backend).scores.any()


@pytest.mark.parametrize("backend", BACKENDS)
def test_nonnegative_and_finite(backend):
    rng = np.random.default_rng(11)
    cube = HyperCube.from_array(rng.normal(size=(20, 15, 6)) ** 3)
    for algo in Algorithm:
        s = detect(cube, algo, backend=backend).scores
        assert s.shape == (20, 15) and np.all(np.isfinite(s)) and s.min() >= 0


@pytest.mark.parametrize("algo", list(Algorithm))
def test_translation_invariance(algo):
    rng = np.random.default_rng(12)
    v = rng.normal(size=(12, 11, 5))
    shift = rng.normal(size=5) * 100
    cfg = WindowConfig.single(5) if algo is Algorithm.LRX else WindowConfig.dual(3, 7)
    a = detect(HyperCube.from_array(v), algo, cfg).scores
    b = detect(HyperCube.from_array(v + shift), algo, cfg).scores
    assert np.max(np.abs(a - b)) < 1e-8


def test_lrx_affine_invariance_without_ridge():
    rng = np.random.default_rng(13)
    v = rng.normal(size=(14, 14, 4))
    b = rng.normal(size=(4, 4)) + 3 * np.eye(4)
    cfg = WindowConfig.single(7)
    s1 = local_rx(HyperCube.from_array(v), cfg, ridge=0.0).scores
    s2 = local_rx(HyperCube.from_array(v @ b.T), cfg, ridge=0.0).scores
    assert np.max(np.abs(s1 - s2) / np.maximum(1.0, s1)) < 1e-6


def test_bright_blob_is_local_maximum():
    rng = np.random.default_rng(14)
    v = rng.normal(size=(21, 21, 4)) * 0.1
    v[10, 10] += 3.0
    s = dwrx(HyperCube.from_array(v), WindowConfig.dual(1, 7)).scores
    assert np.unravel_index(np.argmax(s), s.shape) == (10, 10)
    assert np.median(s) < 0.1 * s[10, 10]


@pytest.mark.parametrize("backend", BACKENDS)
def test_worker_count_does_not_change_output(backend):
    rng = np.random.default_rng(15)
    cube = HyperCube.from_array(rng.normal(size=(3 * BLOCK_ROWS + 5, 9, 4)))
    for algo in Algorithm:
        cfg = WindowConfig.single(5) if algo is Algorithm.LRX else WindowConfig.dual(3, 7)
        ref = detect(cube, algo, cfg, workers=1, backend=backend).scores
        for workers in (2, 3, 8):
            assert np.array_equal(detect(cube, algo, cfg, workers=workers, backend=backend).scores, ref)


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(16)
    cube = HyperCube.from_array(rng.normal(size=(30, 25, 12)))
    for algo in Algorithm:
        a, b = (detect(cube, algo, backend=name).scores for name in BACKENDS)
        assert np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))) < 1e-9


def test_edge_shapes():
    # single-row and single-column images fall back to symmetric mirroring
    rng = np.random.default_rng(17)
    for shape in ((1, 12, 2), (12, 1, 2), (2, 2, 2)):
        s = dwrx(HyperCube.from_array(rng.normal(size=shape)), WindowConfig.dual(1, 3)).scores
        assert s.shape == shape[:2] and np.all(np.isfinite(s))


@pytest.mark.parametrize("backend", BACKENDS)
def test_singular_background_reports_pixel(backend):
    rng = np.random.default_rng(18)
    v = np.zeros((6, 6, 2))
    v[..., 0] = rng.normal(size=(6, 6))
    with pytest.raises(SingularAfterRidge) as err:
        local_rx(HyperCube.from_array(v), WindowConfig.single(3), ridge=0.0, backend=backend)
    assert err.value.pixel == (0, 0)
    assert "row=0" in str(err.value)
    # the default ridge rescues the same cube
    assert np.all(np.isfinite(local_rx(HyperCube.from_array(v), WindowConfig.single(3), backend=backend).scores))


def test_config_validation():
    for bad in (lambda: WindowConfig.single(4), lambda: WindowConfig.single(1), lambda: WindowConfig.dual(5, 6),
                lambda: WindowConfig.dual(5, 5), lambda: WindowConfig.dual(2, 9), lambda: WindowConfig("box"),
                lambda: DwestConfig(0.0), lambda: DwestConfig(1.5)):
        with pytest.raises(ConfigMismatch):
            bad()
    assert WindowConfig.single().describe() == "15" and WindowConfig.dual().describe() == "5/13"


def test_detect_dispatch_and_mismatch(small_cube):
    assert np.array_equal(detect(small_cube, "lrx", WindowConfig.single(5)).scores,
                          local_rx(small_cube, WindowConfig.single(5)).scores)
    with pytest.raises(ConfigMismatch):
        detect(small_cube, Algorithm.DWEST, WindowConfig.single(15))
    with pytest.raises(ConfigMismatch):
        detect(small_cube, Algorithm.LRX, WindowConfig.dual(5, 13))
    with pytest.raises(ConfigMismatch):
        dwrx(small_cube, WindowConfig.single(5))
    result = detect(small_cube, "dwest", WindowConfig.dual(3, 7), eigen_fraction=0.5)
    assert result.algorithm == "dwest" and result.params["eigen_fraction"] == 0.5 and result.seconds >= 0


def test_eigen_fraction_one_keeps_only_top(small_cube):
    cfg = WindowConfig.dual(3, 7)
    all_kept = dwest(small_cube, cfg, DwestConfig(1e-9)).scores
    top_only = dwest(small_cube, cfg, DwestConfig(1.0)).scores
    assert not np.array_equal(all_kept, top_only)
    assert np.max(np.abs(top_only - naive_dwest(small_cube.values, 3, 7, 1.0))) < 1e-10


def test_score_file_round_trip(tmp_path, small_cube):
    result = local_rx(small_cube, WindowConfig.single(3))
    hdr, img = save_scores(tmp_path / "s", result)
    assert img.stat().st_size == 10 * 10 * 4
    assert "data type = 4" in hdr.read_text() and "bands = 1" in hdr.read_text()
    back = load_scores(tmp_path / "s.hdr")
    assert np.array_equal(back, result.scores.astype(np.float32).astype(np.float64))
