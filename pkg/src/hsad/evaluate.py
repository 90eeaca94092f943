"""ROC/AUC evaluation, adaptive thresholding and score-map rendering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTruth, DimensionMismatch

__all__ = [
    "RocCurve",
    "ThresholdResult",
    "roc_curve",
    "auc",
    "pairwise_auc",
    "adaptive_threshold",
    "render_pgm",
    "format_roc_csv",
    "parse_roc_csv",
]


@dataclass(frozen=True)
class RocCurve:
    """Points ``(far, td)`` from (0, 0) to (1, 1), one per distinct threshold."""

    far: np.ndarray
    td: np.ndarray
    auc: float
    thresholds: np.ndarray

    @property
    def points(self):
        return list(zip(self.far.tolist(), self.td.tolist()))


@dataclass(frozen=True)
class ThresholdResult:
    tau: float
    mask: np.ndarray
    z_alpha: float
    mean: float
    std: float


def _grid(scores):
    return np.asarray(getattr(scores, "scores", scores), dtype=np.float64)


def roc_curve(scores, truth) -> RocCurve:
    """Exact ROC over every distinct score value.

    Pixels with equal scores enter together, so ties produce a diagonal
    segment and the trapezoidal area equals the Mann-Whitney statistic
    ``P(s_anomaly > s_background) + P(equal) / 2``.  The area is computed
    from integer counts, with a single division at the end.
    """
    s = _grid(scores)
    t = np.asarray(truth, dtype=bool)
    if s.shape != t.shape:
        raise DimensionMismatch(f"score map {s.shape} and truth mask {t.shape} differ in shape")
    s = s.ravel()
    t = t.ravel()
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTruth(f"truth mask needs both classes (positives={n_pos}, negatives={n_neg})")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    t_sorted = t[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp = np.r_[0, np.cumsum(t_sorted, dtype=np.int64)[ends]]
    fp = np.r_[0, np.cumsum(~t_sorted, dtype=np.int64)[ends]]
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1]), dtype=np.int64))
    area = twice_area / (2 * n_pos * n_neg)
    thresholds = np.r_[np.inf, s_sorted[ends]]
    return RocCurve(far=fp / n_neg, td=tp / n_pos, auc=area, thresholds=thresholds)


def auc(curve) -> float:
    """Trapezoidal area under a ROC curve (a :class:`RocCurve` or a list of points)."""
    if isinstance(curve, RocCurve):
        x, y = curve.far, curve.td
    else:
        pts = np.asarray(curve, dtype=np.float64)
        x, y = pts[:, 0], pts[:, 1]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1])) / 2.0)


def pairwise_auc(scores, truth) -> float:
    """Brute-force AUC over all (anomaly, background) pairs; O(P * N) memory."""
    s = _grid(scores).ravel()
    t = np.asarray(truth, dtype=bool).ravel()
    pos, neg = s[t], s[~t]
    greater = int(np.sum(pos[:, None] > neg[None, :]))
    equal = int(np.sum(pos[:, None] == neg[None, :]))
    return (2 * greater + equal) / (2 * pos.size * neg.size)


def adaptive_threshold(scores, z_alpha: float) -> ThresholdResult:
    """Cut-off ``tau = mean + z_alpha * std`` over the whole map; anomalies are ``score > tau``."""
    s = _grid(scores)
    if s.size == 0:
        raise ValueError("score map is empty")
    mean = float(s.mean())
    std = float(s.std())
    tau = mean + z_alpha * std
    return ThresholdResult(tau=tau, mask=s > tau, z_alpha=float(z_alpha), mean=mean, std=std)


def render_pgm(scores) -> bytes:
    """8-bit binary PGM of a score map, linearly stretched from min..max to 0..255.

    Values are rounded half away from zero; a constant map renders black.
    """
    s = _grid(scores)
    if not np.all(np.isfinite(s)):
        raise ValueError("score map contains non-finite values")
    h, w = s.shape
    lo, hi = float(s.min()), float(s.max())
    if hi > lo:
        scaled = (s - lo) * 255.0 / (hi - lo)
        pixels = np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)
    else:
        pixels = np.zeros((h, w), dtype=np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def format_roc_csv(curve: RocCurve) -> str:
    lines = ["far,td"]
    lines += [f"{x:.17g},{y:.17g}" for x, y in zip(curve.far, curve.td)]
    lines.append(f"# auc={curve.auc:.17g}")
    return "\n".join(lines) + "\n"


def parse_roc_csv(text: str):
    """Return ``(points, auc)`` from :func:`format_roc_csv` output."""
    points = []
    value = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line == "far,td":
            continue
        if line.startswith("# auc="):
            value = float(line.split("=", 1)[1])
            continue
        x, y = line.split(",")
        points.append((float(x), float(y)))
    return points, value

