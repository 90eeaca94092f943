"""Sample statistics and the small dense linear algebra the detectors rely on."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import EmptySampleSet, NoConvergence, NotSymmetric, SingularAfterRidge, TooFewSamples

__all__ = [
    "DEFAULT_RIDGE",
    "CovarianceMatrix",
    "EigenDecomposition",
    "mean_vector",
    "covariance",
    "regularized_inverse",
    "symmetric_eigen",
    "jacobi_eigen",
    "fix_eigenvector_signs",
]

DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True)
class CovarianceMatrix:
    entries: np.ndarray
    ridge_applied: float = 0.0

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending; ``vectors[:, i]`` belongs to ``values[i]``."""

    values: np.ndarray
    vectors: np.ndarray


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptySampleSet("sample set is empty")
    return x


def mean_vector(samples) -> np.ndarray:
    """Component-wise mean of an ``(N, L)`` sample array."""
    return _as_samples(samples).mean(axis=0)


def covariance(samples, mean=None) -> CovarianceMatrix:
    """Maximum-likelihood covariance, ``(1/N) * sum (x - mu)(x - mu)^T``.

    The divisor is N rather than N - 1.  RX-type scores only change by a
    global factor between the two conventions.
    """
    x = _as_samples(samples)
    if x.shape[0] < 2:
        raise TooFewSamples(f"covariance needs at least 2 samples, got {x.shape[0]}")
    mu = x.mean(axis=0) if mean is None else np.asarray(mean, dtype=np.float64)
    centered = x - mu
    c = centered.T @ centered / x.shape[0]
    return CovarianceMatrix(0.5 * (c + c.T), 0.0)


def regularized_inverse(cov, ridge_fraction: float = DEFAULT_RIDGE) -> CovarianceMatrix:
    """Invert ``C + delta * I`` with ``delta = ridge_fraction * trace(C) / L``.

    Raises :class:`SingularAfterRidge` when the loaded matrix is still not
    numerically positive definite.
    """
    c = cov.entries if isinstance(cov, CovarianceMatrix) else np.asarray(cov, dtype=np.float64)
    if ridge_fraction < 0:
        raise ValueError("ridge_fraction must be nonnegative")
    size = c.shape[0]
    trace = float(np.trace(c))
    delta = ridge_fraction * trace / size if trace > 0 else 0.0
    loaded = c + delta * np.eye(size)
    try:
        factor = linalg.cho_factor(loaded, lower=True, check_finite=True)
    except linalg.LinAlgError:
        raise SingularAfterRidge(f"covariance is singular after ridge delta={delta:g}") from None
    inv = linalg.cho_solve(factor, np.eye(size))
    if not np.all(np.isfinite(inv)):
        raise SingularAfterRidge(f"covariance is singular after ridge delta={delta:g}")
    return CovarianceMatrix(0.5 * (inv + inv.T), delta)


def fix_eigenvector_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry (first on ties) is positive."""
    k = np.argmax(np.abs(vectors), axis=0)
    lead = vectors[k, np.arange(vectors.shape[1])]
    return vectors * np.where(lead < 0, -1.0, 1.0)


def jacobi_eigen(a, max_sweeps: int = 100, tol: float = 1e-12):
    """Cyclic Jacobi eigenvalue iteration; returns unsorted ``(values, vectors)``.

    Sweeps over every off-diagonal pair until the off-diagonal Frobenius
    norm is below ``tol`` times the norm of the whole matrix.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.diag(a).copy(), v
    mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a[mask])
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(1.0, theta))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[:, [p, q]] = a[:, [p, q]] @ rot
                a[[p, q], :] = rot.T @ a[[p, q], :]
                a[p, q] = a[q, p] = 0.0
                v[:, [p, q]] = v[:, [p, q]] @ rot
    off = np.linalg.norm(a[mask])
    if off <= tol * scale:
        return np.diag(a).copy(), v
    raise NoConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps (off-diagonal norm {off:.3g})")


def symmetric_eigen(a, method: str = "jacobi") -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix.

    ``method="jacobi"`` uses :func:`jacobi_eigen`; ``method="lapack"`` uses
    LAPACK ``syevd`` through numpy.  Either way eigenvalues are sorted
    descending and eigenvector signs are normalised by
    :func:`fix_eigenvector_signs`.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > 1e-8 * max(1.0, float(np.max(np.abs(a)))):
        raise NotSymmetric(f"matrix asymmetry {asym:.3g} exceeds 1e-8")
    sym = 0.5 * (a + a.T)
    if method == "jacobi":
        values, vectors = jacobi_eigen(sym)
    elif method == "lapack":
        values, vectors = np.linalg.eigh(sym)
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(values[order], fix_eigenvector_signs(vectors[:, order]))
