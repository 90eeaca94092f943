# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: filter-bank DWT and sliding-window detectors.

Same API and return conventions as ``hsad._fallback``.  Window moments are
kept as running column sums (packed lower triangle for the second moment)
that slide down the rows of a block and across the columns of a row, so the
per-pixel cost is O(L^2) plus one LAPACK factorisation.  All heavy loops run
without the GIL.
"""

import numpy as np

from libc.math cimport fabs
from libc.stdlib cimport calloc, free
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dtrsv
from scipy.linalg.cython_lapack cimport dpotrf, dsyev

NAME = "compiled"


def dwt_approx(const double[:, ::1] spectra, const double[::1] low, int stages):
    cdef Py_ssize_t n = spectra.shape[0]
    cdef Py_ssize_t width = spectra.shape[1]
    cdef Py_ssize_t m = low.shape[0]
    cdef Py_ssize_t out_len = width >> stages
    out_arr = np.empty((n, out_len))
    cdef double[:, ::1] out = out_arr
    cdef double* buf = <double*>calloc(width, sizeof(double))
    cdef double* tmp = <double*>calloc(width, sizeof(double))
    cdef Py_ssize_t i, k, j, s, length, half
    cdef double acc
    if buf == NULL or tmp == NULL:
        free(buf)
        free(tmp)
        raise MemoryError()
    with nogil:
        for i in range(n):
            memcpy(buf, &spectra[i, 0], width * sizeof(double))
            length = width
            for s in range(stages):
                half = length // 2
                for k in range(half):
                    acc = 0.0
                    for j in range(m):
                        acc = acc + low[j] * buf[(2 * k + j) % length]
                    tmp[k] = acc
                memcpy(buf, tmp, half * sizeof(double))
                length = half
            memcpy(&out[i, 0], buf, out_len * sizeof(double))
    free(buf)
    free(tmp)
    return out_arr


cdef inline void _accumulate_row(const double[:, :, ::1] P, Py_ssize_t row, Py_ssize_t c0, Py_ssize_t nc,
                                 Py_ssize_t L, double sign, double* col1, double* col2) noexcept nogil:
    """col{1,2}[c] += sign * moments of pixel (row, c0 + c), for c < nc."""
    cdef Py_ssize_t c, i, j, t
    cdef Py_ssize_t K = L * (L + 1) // 2
    cdef const double* x
    cdef double* p1
    cdef double* p2
    cdef double xi
    for c in range(nc):
        x = &P[row, c0 + c, 0]
        p1 = col1 + c * L
        p2 = col2 + c * K
        t = 0
        for i in range(L):
            xi = sign * x[i]
            p1[i] += xi
            for j in range(i + 1):
                p2[t] += xi * x[j]
                t += 1


cdef inline void _strip_moments(const double[:, :, ::1] P, Py_ssize_t top, Py_ssize_t size,
                                Py_ssize_t c0, Py_ssize_t nc, Py_ssize_t L, double* col1, double* col2) noexcept nogil:
    cdef Py_ssize_t K = L * (L + 1) // 2
    cdef Py_ssize_t q
    for q in range(nc * L):
        col1[q] = 0.0
    for q in range(nc * K):
        col2[q] = 0.0
    for q in range(size):
        _accumulate_row(P, top + q, c0, nc, L, 1.0, col1, col2)


cdef inline void _slide(double* box1, double* box2, double* col1, double* col2, Py_ssize_t add,
                        Py_ssize_t sub, Py_ssize_t L) noexcept nogil:
    """box += column ``add``; box -= column ``sub`` (skipped when negative)."""
    cdef Py_ssize_t K = L * (L + 1) // 2
    cdef Py_ssize_t q
    for q in range(L):
        box1[q] += col1[add * L + q]
    for q in range(K):
        box2[q] += col2[add * K + q]
    if sub >= 0:
        for q in range(L):
            box1[q] -= col1[sub * L + q]
        for q in range(K):
            box2[q] -= col2[sub * K + q]


cdef inline void _moments_to_cov(const double* s1, const double* s2, double n, Py_ssize_t L,
                                 double* mu, double* cov) noexcept nogil:
    """Fill mu and the lower triangle of column-major ``cov`` from raw sums."""
    cdef Py_ssize_t i, j, t = 0
    for i in range(L):
        mu[i] = s1[i] / n
    for i in range(L):
        for j in range(i + 1):
            cov[i + j * L] = s2[t] / n - mu[i] * mu[j]
            t += 1


cdef int _quad_form(double* a, double* d, int L, double ridge, double tol, double* score) noexcept nogil:
    """score = d^T (A + delta I)^-1 d using the lower triangle of A; nonzero on failure."""
    cdef int i, info = 0, inc = 1
    cdef double trace = 0.0, dd = 0.0, delta, acc = 0.0
    cdef char uplo = b'L'
    cdef char trans = b'N'
    cdef char diag = b'N'
    for i in range(L):
        trace += a[i + i * L]
        dd += d[i] * d[i]
    if trace <= tol * L:
        score[0] = 0.0
        return 0 if dd <= tol else 1
    delta = ridge * trace / L
    for i in range(L):
        a[i + i * L] += delta
    dpotrf(&uplo, &L, a, &L, &info)
    if info != 0:
        return 1
    dtrsv(&uplo, &trans, &diag, &L, a, &L, d, &inc)
    for i in range(L):
        acc += d[i] * d[i]
    if acc != acc or acc - acc != 0.0:
        return 1
    score[0] = acc
    return 0


cdef class _Scratch:
    cdef double* mem
    cdef double* col1
    cdef double* col2
    cdef double* icol1
    cdef double* icol2
    cdef double* box1
    cdef double* box2
    cdef double* ibox1
    cdef double* ibox2
    cdef double* ann1
    cdef double* ann2
    cdef double* mu
    cdef double* mu2
    cdef double* a
    cdef double* a2
    cdef double* d
    cdef double* w
    cdef double* work
    cdef int lwork

    def __cinit__(self, Py_ssize_t nc, Py_ssize_t L, bint dual, bint eig):
        cdef Py_ssize_t K = L * (L + 1) // 2
        cdef Py_ssize_t ncols_sets = 2 if dual else 1
        cdef int info = 0, n = <int>L, query = -1
        cdef double opt = 0.0
        cdef char jobz = b'V'
        cdef char uplo = b'L'
        self.lwork = 0
        if eig:
            dsyev(&jobz, &uplo, &n, &opt, &n, &opt, &opt, &query, &info)
            self.lwork = max(<int>opt, 3 * n)
        cdef Py_ssize_t total = ncols_sets * nc * (L + K) + 3 * (L + K) + 4 * L + 2 * L * L + self.lwork
        self.mem = <double*>calloc(total, sizeof(double))
        if self.mem == NULL:
            raise MemoryError()
        cdef double* p = self.mem
        self.col1 = p; p += nc * L
        self.col2 = p; p += nc * K
        if dual:
            self.icol1 = p; p += nc * L
            self.icol2 = p; p += nc * K
        self.box1 = p; p += L
        self.box2 = p; p += K
        self.ibox1 = p; p += L
        self.ibox2 = p; p += K
        self.ann1 = p; p += L
        self.ann2 = p; p += K
        self.mu = p; p += L
        self.mu2 = p; p += L
        self.d = p; p += L
        self.w = p; p += L
        self.a = p; p += L * L
        self.a2 = p; p += L * L
        self.work = p

    def __dealloc__(self):
        free(self.mem)


cdef inline void _zero(double* p, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t q
    for q in range(n):
        p[q] = 0.0


def lrx_rows(const double[:, :, ::1] P, Py_ssize_t r0, Py_ssize_t r1, Py_ssize_t ncols, Py_ssize_t pad,
             Py_ssize_t size, double ridge, double tol, double[:, ::1] out):
    cdef Py_ssize_t L = P.shape[2]
    cdef Py_ssize_t K = L * (L + 1) // 2
    cdef Py_ssize_t h = size // 2
    cdef Py_ssize_t nc = ncols + 2 * h
    cdef Py_ssize_t c0 = pad - h
    cdef double n = size * size - 1
    cdef _Scratch s = _Scratch(nc, L, False, False)
    cdef Py_ssize_t r, c, i, j, t, top
    cdef const double* x
    cdef double score = 0.0
    cdef Py_ssize_t status = -1
    with nogil:
        for r in range(r0, r1):
            top = r + pad - h
            if r == r0:
                _strip_moments(P, top, size, c0, nc, L, s.col1, s.col2)
            else:
                _accumulate_row(P, top - 1, c0, nc, L, -1.0, s.col1, s.col2)
                _accumulate_row(P, top + size - 1, c0, nc, L, 1.0, s.col1, s.col2)
            _zero(s.box1, L)
            _zero(s.box2, K)
            for c in range(size - 1):
                _slide(s.box1, s.box2, s.col1, s.col2, c, -1, L)
            for c in range(ncols):
                _slide(s.box1, s.box2, s.col1, s.col2, c + size - 1, c - 1, L)
                x = &P[r + pad, c + pad, 0]
                # background excludes the pixel under test
                t = 0
                for i in range(L):
                    s.ibox1[i] = s.box1[i] - x[i]
                    for j in range(i + 1):
                        s.ibox2[t] = s.box2[t] - x[i] * x[j]
                        t += 1
                _moments_to_cov(s.ibox1, s.ibox2, n, L, s.mu, s.a)
                for i in range(L):
                    s.d[i] = x[i] - s.mu[i]
                if _quad_form(s.a, s.d, <int>L, ridge, tol, &score):
                    status = (r - r0) * ncols + c
                    break
                out[r - r0, c] = score
            if status >= 0:
                break
    return status


cdef inline void _dual_box(const double[:, :, ::1] P, _Scratch s, Py_ssize_t r, Py_ssize_t r0, Py_ssize_t pad,
                           Py_ssize_t inner, Py_ssize_t outer, Py_ssize_t nc, Py_ssize_t L) noexcept nogil:
    cdef Py_ssize_t hi = inner // 2, ho = outer // 2
    cdef Py_ssize_t c0 = pad - ho
    cdef Py_ssize_t otop = r + pad - ho, itop = r + pad - hi
    if r == r0:
        _strip_moments(P, otop, outer, c0, nc, L, s.col1, s.col2)
        _strip_moments(P, itop, inner, c0, nc, L, s.icol1, s.icol2)
    else:
        _accumulate_row(P, otop - 1, c0, nc, L, -1.0, s.col1, s.col2)
        _accumulate_row(P, otop + outer - 1, c0, nc, L, 1.0, s.col1, s.col2)
        _accumulate_row(P, itop - 1, c0, nc, L, -1.0, s.icol1, s.icol2)
        _accumulate_row(P, itop + inner - 1, c0, nc, L, 1.0, s.icol1, s.icol2)


cdef inline void _dual_stats(_Scratch s, Py_ssize_t L, double n_in, double n_out, bint want_inner) noexcept nogil:
    """mu <- inner mean, mu2 <- annulus mean, a2 <- annulus cov, a <- inner cov (optional)."""
    cdef Py_ssize_t K = L * (L + 1) // 2
    cdef Py_ssize_t q
    if want_inner:
        _moments_to_cov(s.ibox1, s.ibox2, n_in, L, s.mu, s.a)
    else:
        for q in range(L):
            s.mu[q] = s.ibox1[q] / n_in
    for q in range(L):
        s.ann1[q] = s.box1[q] - s.ibox1[q]
    for q in range(K):
        s.ann2[q] = s.box2[q] - s.ibox2[q]
    _moments_to_cov(s.ann1, s.ann2, n_out, L, s.mu2, s.a2)


def dwrx_rows(const double[:, :, ::1] P, Py_ssize_t r0, Py_ssize_t r1, Py_ssize_t ncols, Py_ssize_t pad,
              Py_ssize_t inner, Py_ssize_t outer, double ridge, double tol, double[:, ::1] out):
    cdef Py_ssize_t L = P.shape[2]
    cdef Py_ssize_t K = L * (L + 1) // 2
    cdef Py_ssize_t hi = inner // 2, ho = outer // 2
    cdef Py_ssize_t nc = ncols + 2 * ho
    cdef Py_ssize_t shift = ho - hi
    cdef double n_in = inner * inner
    cdef double n_out = outer * outer - inner * inner
    cdef _Scratch s = _Scratch(nc, L, True, False)
    cdef Py_ssize_t r, c, i
    cdef double score = 0.0
    cdef Py_ssize_t status = -1
    with nogil:
        for r in range(r0, r1):
            _dual_box(P, s, r, r0, pad, inner, outer, nc, L)
            _zero(s.box1, L)
            _zero(s.box2, K)
            _zero(s.ibox1, L)
            _zero(s.ibox2, K)
            for c in range(outer - 1):
                _slide(s.box1, s.box2, s.col1, s.col2, c, -1, L)
            for c in range(inner - 1):
                _slide(s.ibox1, s.ibox2, s.icol1, s.icol2, shift + c, -1, L)
            for c in range(ncols):
                _slide(s.box1, s.box2, s.col1, s.col2, c + outer - 1, c - 1, L)
                _slide(s.ibox1, s.ibox2, s.icol1, s.icol2, shift + c + inner - 1,
                       shift + c - 1 if c > 0 else -1, L)
                _dual_stats(s, L, n_in, n_out, False)
                for i in range(L):
                    s.d[i] = s.mu[i] - s.mu2[i]
                if _quad_form(s.a2, s.d, <int>L, ridge, tol, &score):
                    status = (r - r0) * ncols + c
                    break
                out[r - r0, c] = score
            if status >= 0:
                break
    return status


def dwest_rows(const double[:, :, ::1] P, Py_ssize_t r0, Py_ssize_t r1, Py_ssize_t ncols, Py_ssize_t pad,
               Py_ssize_t inner, Py_ssize_t outer, double eigen_fraction, double tol, double[:, ::1] out):
    cdef Py_ssize_t L = P.shape[2]
    cdef Py_ssize_t K = L * (L + 1) // 2
    cdef Py_ssize_t hi = inner // 2, ho = outer // 2
    cdef Py_ssize_t nc = ncols + 2 * ho
    cdef Py_ssize_t shift = ho - hi
    cdef double n_in = inner * inner
    cdef double n_out = outer * outer - inner * inner
    cdef _Scratch s = _Scratch(nc, L, True, True)
    cdef Py_ssize_t r, c, i, j, k, lead
    cdef int n = <int>L, info = 0
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    cdef double lam_max, cut, proj, total, v, big
    cdef Py_ssize_t status = -1
    with nogil:
        for r in range(r0, r1):
            _dual_box(P, s, r, r0, pad, inner, outer, nc, L)
            _zero(s.box1, L)
            _zero(s.box2, K)
            _zero(s.ibox1, L)
            _zero(s.ibox2, K)
            for c in range(outer - 1):
                _slide(s.box1, s.box2, s.col1, s.col2, c, -1, L)
            for c in range(inner - 1):
                _slide(s.ibox1, s.ibox2, s.icol1, s.icol2, shift + c, -1, L)
            for c in range(ncols):
                _slide(s.box1, s.box2, s.col1, s.col2, c + outer - 1, c - 1, L)
                _slide(s.ibox1, s.ibox2, s.icol1, s.icol2, shift + c + inner - 1,
                       shift + c - 1 if c > 0 else -1, L)
                _dual_stats(s, L, n_in, n_out, True)
                for j in range(L):
                    for i in range(j, L):
                        s.a[i + j * L] -= s.a2[i + j * L]
                    s.d[j] = s.mu[j] - s.mu2[j]
                dsyev(&jobz, &uplo, &n, s.a, &n, s.w, s.work, &s.lwork, &info)
                if info != 0:
                    status = (r - r0) * ncols + c
                    break
                # eigenvalues ascending; columns of a are eigenvectors
                lam_max = s.w[L - 1]
                total = 0.0
                if lam_max > tol:
                    cut = eigen_fraction * lam_max
                    k = L - 1
                    while k >= 0 and s.w[k] > tol and s.w[k] >= cut:
                        lead = 0
                        big = -1.0
                        proj = 0.0
                        for i in range(L):
                            v = s.a[i + k * L]
                            if fabs(v) > big:
                                big = fabs(v)
                                lead = i
                            proj += v * s.d[i]
                        if s.a[lead + k * L] < 0:
                            proj = -proj
                        total += proj
                        k -= 1
                out[r - r0, c] = fabs(total)
            if status >= 0:
                break
    return status
