"""Pure numpy implementation of the hot kernels.

Mirrors the API of the compiled ``_kernels`` extension.  Every detector
kernel fills ``out[r - r0, c]`` for output rows ``r0 <= r < r1`` of a cube
that has been mirror-padded by ``pad`` pixels on each spatial side, and
returns ``-1`` on success or the flat in-block index ``(r - r0) * ncols + c``
of the first pixel whose statistics could not be used.

Work is vectorised across one output row at a time: vertical window sums are
formed with a batched matmul, horizontal sums with a cumulative-sum
difference.
"""

import numpy as np

NAME = "python"


def dwt_approx(spectra, low, stages):
    x = np.asarray(spectra, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64)
    taps = np.arange(len(low))
    for _ in range(stages):
        n = x.shape[-1]
        idx = (2 * np.arange(n // 2)[:, None] + taps[None, :]) % n
        x = x[:, idx] @ low
    return np.ascontiguousarray(x)


def _column_moments(padded, top, size, c0, nc):
    """First and second moments of each column strip ``rows top..top+size-1``."""
    strip = padded[top:top + size, c0:c0 + nc]  # (size, nc, L)
    s1 = strip.sum(axis=0)
    cols = strip.transpose(1, 0, 2)  # (nc, size, L)
    s2 = cols.transpose(0, 2, 1) @ cols
    return s1, s2


def _box(s1, s2, size, offset, ncols):
    """Horizontal window sums of ``size`` consecutive columns starting at ``offset + c``."""
    z1 = np.zeros((1,) + s1.shape[1:])
    z2 = np.zeros((1,) + s2.shape[1:])
    c1 = np.concatenate([z1, np.cumsum(s1, axis=0)])
    c2 = np.concatenate([z2, np.cumsum(s2, axis=0)])
    lo = offset
    hi = offset + ncols
    return c1[lo + size:hi + size] - c1[lo:hi], c2[lo + size:hi + size] - c2[lo:hi]


def _cov(s1, s2, n):
    mu = s1 / n
    cov = s2 / n - mu[:, :, None] * mu[:, None, :]
    return mu, 0.5 * (cov + cov.transpose(0, 2, 1))


def _quad_forms(cov, d, ridge, tol):
    """Return (scores, index of first failing pixel or -1)."""
    npix, L = d.shape
    scores = np.zeros(npix)
    trace = np.trace(cov, axis1=1, axis2=2)
    degenerate = trace <= tol * L
    dd = np.einsum("ij,ij->i", d, d)
    bad = np.flatnonzero(degenerate & (dd > tol))
    first_bad = bad[0] if len(bad) else npix
    live = np.flatnonzero(~degenerate)
    if len(live):
        a = cov[live] + (ridge * trace[live] / L)[:, None, None] * np.eye(L)
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            chol = None
        if chol is None or not np.all(np.isfinite(chol)):
            for k, i in enumerate(live):
                try:
                    np.linalg.cholesky(a[k])
                except np.linalg.LinAlgError:
                    first_bad = min(first_bad, i)
                    break
            else:
                first_bad = min(first_bad, live[0])
            return scores, int(first_bad)
        y = np.linalg.solve(chol, d[live][:, :, None])[:, :, 0]
        scores[live] = np.einsum("ij,ij->i", y, y)
    return scores, (int(first_bad) if first_bad < npix else -1)


def lrx_rows(padded, r0, r1, ncols, pad, size, ridge, tol, out):
    h = size // 2
    n = size * size - 1
    for r in range(r0, r1):
        s1, s2 = _column_moments(padded, r + pad - h, size, pad - h, ncols + 2 * h)
        b1, b2 = _box(s1, s2, size, 0, ncols)
        x = padded[r + pad, pad:pad + ncols]
        b1 = b1 - x
        b2 = b2 - x[:, :, None] * x[:, None, :]
        mu, cov = _cov(b1, b2, n)
        scores, bad = _quad_forms(cov, x - mu, ridge, tol)
        if bad >= 0:
            return (r - r0) * ncols + bad
        out[r - r0, :] = scores
    return -1


def _dual_stats(padded, r, ncols, pad, inner, outer):
    hi, ho = inner // 2, outer // 2
    nc = ncols + 2 * ho
    o1, o2 = _column_moments(padded, r + pad - ho, outer, pad - ho, nc)
    i1, i2 = _column_moments(padded, r + pad - hi, inner, pad - ho, nc)
    bo1, bo2 = _box(o1, o2, outer, 0, ncols)
    bi1, bi2 = _box(i1, i2, inner, ho - hi, ncols)
    mu_in, cov_in = _cov(bi1, bi2, inner * inner)
    mu_out, cov_out = _cov(bo1 - bi1, bo2 - bi2, outer * outer - inner * inner)
    return mu_in, cov_in, mu_out, cov_out


def dwrx_rows(padded, r0, r1, ncols, pad, inner, outer, ridge, tol, out):
    for r in range(r0, r1):
        mu_in, _cov_in, mu_out, cov_out = _dual_stats(padded, r, ncols, pad, inner, outer)
        scores, bad = _quad_forms(cov_out, mu_in - mu_out, ridge, tol)
        if bad >= 0:
            return (r - r0) * ncols + bad
        out[r - r0, :] = scores
    return -1


def _fix_signs(vectors):
    """Flip each eigenvector (column) so its largest-magnitude entry is positive."""
    k = np.argmax(np.abs(vectors), axis=-2)
    lead = np.take_along_axis(vectors, k[..., None, :], axis=-2)
    return vectors * np.where(lead < 0, -1.0, 1.0)


def dwest_rows(padded, r0, r1, ncols, pad, inner, outer, eigen_fraction, tol, out):
    for r in range(r0, r1):
        mu_in, cov_in, mu_out, cov_out = _dual_stats(padded, r, ncols, pad, inner, outer)
        diff = cov_in - cov_out
        try:
            values, vectors = np.linalg.eigh(diff)
        except np.linalg.LinAlgError:
            for c in range(ncols):
                try:
                    np.linalg.eigh(diff[c])
                except np.linalg.LinAlgError:
                    return (r - r0) * ncols + c
            return (r - r0) * ncols
        vectors = _fix_signs(vectors)
        lam_max = values[:, -1:]
        keep = (values > tol) & (values >= eigen_fraction * lam_max)
        proj = np.einsum("cij,ci->cj", vectors, mu_in - mu_out)
        out[r - r0, :] = np.abs(np.where(keep, proj, 0.0).sum(axis=1))
    return -1
