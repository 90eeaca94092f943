"""Hyperspectral anomaly detection with wavelet spectral reduction."""

__version__ = "0.1.0"

from .cube import CubeHeader, HyperCube, load_cube, save_cube  # noqa: E402
from .detect import Algorithm, DwestConfig, ScoreMap, WindowConfig, detect, dwest, dwrx, local_rx  # noqa: E402
from .evaluate import adaptive_threshold, pairwise_auc, roc_curve  # noqa: E402
from .synth import SceneConfig, generate_scene, benchmark_scene_config  # noqa: E402
from .wavelet import daubechies_filters, multilevel_approx, reduce_cube  # noqa: E402

__all__ = [
    "__version__",
    "CubeHeader", "HyperCube", "load_cube", "save_cube",
    "Algorithm", "DwestConfig", "ScoreMap", "WindowConfig", "detect", "dwest", "dwrx", "local_rx",
    "adaptive_threshold", "pairwise_auc", "roc_curve",
    "SceneConfig", "generate_scene", "benchmark_scene_config",
    "daubechies_filters", "multilevel_approx", "reduce_cube",
]
