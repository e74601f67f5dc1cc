# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled pointwise kernels (hot path of the flow stepper).

Same contract as _kernels_py: packed (n*n, P) float64 entry layout, flow
kinds 0/1/2.  Non-identity metrics are reduced to the identity case by a
NumPy pre-transform (constant per run, so not hot); the per-point work
runs as straight C loops.  Eigenvalues use the closed form for n <= 2
and a cyclic complex Jacobi sweep with closed-form 2x2 rotations for
n = 3, iterated until the off-diagonal mass reaches round-off.
"""

import numpy as np

from libc.math cimport atan, atan2, cos, fabs, hypot, isfinite, sqrt, tan

cdef double PI = 3.141592653589793238462643383279502884
cdef double JACOBI_TOL = 1e-14
cdef int JACOBI_MAX_SWEEPS = 30


def _maybe_transform(pack, n, linv):
    if linv is None:
        return np.ascontiguousarray(pack, dtype=np.float64)
    from . import _kernels_py
    return np.ascontiguousarray(
        _kernels_py._to_b_pack(np.asarray(pack, dtype=np.float64), n, linv)
    )


cdef inline void _det3(double b11, double b22, double b33,
                       double r12, double i12, double r13, double i13,
                       double r23, double i23,
                       double* re, double* im) noexcept nogil:
    # det(B + iI) = (c3 - c1) + i(c2 - 1) from the symmetric functions.
    cdef double a12 = r12 * r12 + i12 * i12
    cdef double a13 = r13 * r13 + i13 * i13
    cdef double a23 = r23 * r23 + i23 * i23
    cdef double c1 = b11 + b22 + b33
    cdef double c2 = b11 * b22 - a12 + b11 * b33 - a13 + b22 * b33 - a23
    # Re(b12 * b23 * conj(b13))
    cdef double tr = (r12 * r23 - i12 * i23) * r13 + (r12 * i23 + i12 * r23) * i13
    cdef double c3 = b11 * b22 * b33 + 2.0 * tr - b11 * a23 - b22 * a13 - b33 * a12
    re[0] = c3 - c1
    im[0] = c2 - 1.0


def velocity_from_entries(pack, int n, linv, int kind,
                          double cot_theta0, double theta0,
                          bint want_fmax=False, out=None):
    """See _kernels_py.velocity_from_entries."""
    cdef double[:, ::1] b = _maybe_transform(pack, n, linv)
    cdef Py_ssize_t P = b.shape[1]
    vel_arr = np.empty(P, dtype=np.float64) if out is None else out
    cdef double[::1] vel = vel_arr
    cdef Py_ssize_t p
    cdef double re, im, s2, r2, dev, v, mean, disc, l2, csc2, f
    cdef double min_sin = 2.0  # min of signed sin(theta); track via squares
    cdef double min_s2 = 2.0
    cdef bint saw_nonpos = False
    cdef double max_dev = 0.0
    cdef double fmax = 0.0
    cdef double sup_abs = 0.0
    cdef bint finite = True
    cdef double d[3]
    cdef double ar[3][3]
    cdef double ai[3][3]
    with nogil:
        for p in range(P):
            if n == 1:
                re = b[0, p]
                im = 1.0
            elif n == 2:
                re = b[0, p] * b[1, p] - 1.0 - (b[2, p] * b[2, p] + b[3, p] * b[3, p])
                im = b[0, p] + b[1, p]
            else:
                _det3(b[0, p], b[1, p], b[2, p],
                      b[3, p], b[4, p], b[5, p], b[6, p], b[7, p], b[8, p],
                      &re, &im)
            r2 = re * re + im * im
            if im <= 0.0 or r2 == 0.0 or not isfinite(r2):
                saw_nonpos = True
                s2 = im / sqrt(r2) if r2 > 0.0 else -1.0
                if s2 < min_sin:
                    min_sin = s2
            else:
                s2 = im * im / r2
                if s2 < min_s2:
                    min_s2 = s2
            if kind == 0:
                v = re / im - cot_theta0
            else:
                dev = theta0 - atan2(im, re)
                if fabs(dev) > max_dev:
                    max_dev = fabs(dev)
                v = dev if kind == 1 else tan(dev)
            if not isfinite(v):
                finite = False
            elif fabs(v) > sup_abs:
                sup_abs = fabs(v)
            vel[p] = v
            if want_fmax:
                csc2 = 1.0 + (re / im) * (re / im)
                if n == 1:
                    f = 1.0
                elif n == 2:
                    mean = 0.5 * (b[0, p] + b[1, p])
                    disc = sqrt(0.25 * (b[0, p] - b[1, p]) * (b[0, p] - b[1, p])
                                + b[2, p] * b[2, p] + b[3, p] * b[3, p])
                    l2 = (mean + disc) * (mean + disc)
                    if (mean - disc) * (mean - disc) < l2:
                        l2 = (mean - disc) * (mean - disc)
                    f = csc2 / (1.0 + l2)
                else:
                    ar[0][0] = b[0, p]; ar[1][1] = b[1, p]; ar[2][2] = b[2, p]
                    ar[0][1] = b[3, p]; ai[0][1] = b[4, p]
                    ar[0][2] = b[5, p]; ai[0][2] = b[6, p]
                    ar[1][2] = b[7, p]; ai[1][2] = b[8, p]
                    ar[1][0] = b[3, p]; ai[1][0] = -b[4, p]
                    ar[2][0] = b[5, p]; ai[2][0] = -b[6, p]
                    ar[2][1] = b[7, p]; ai[2][1] = -b[8, p]
                    ai[0][0] = 0.0; ai[1][1] = 0.0; ai[2][2] = 0.0
                    _jacobi3(d, ar, ai)
                    l2 = d[0] * d[0]
                    if d[1] * d[1] < l2:
                        l2 = d[1] * d[1]
                    if d[2] * d[2] < l2:
                        l2 = d[2] * d[2]
                    f = csc2 / (1.0 + l2)
                if f > fmax:
                    fmax = f
    if not saw_nonpos and min_s2 <= 1.0:
        min_sin = sqrt(min_s2)
    elif not saw_nonpos:
        min_sin = 1.0
    return vel_arr, min_sin, max_dev, bool(finite), \
        (fmax if want_fmax else float("nan")), \
        (sup_abs if finite else float("nan"))


cdef inline void _jacobi3(double* d, double ar[3][3], double ai[3][3]) noexcept nogil:
    """Eigenvalues of a 3x3 Hermitian matrix by cyclic complex Jacobi.

    ar/ai hold the full matrix (Hermitian: ai antisymmetric, ar
    symmetric); destroyed in place.  d receives unsorted eigenvalues.
    """
    cdef int sweep, p, q, m, k
    cdef double r, tau, t, c, s, phr, phi
    cdef double off, scale
    cdef double wpr, wpi, wqr, wqi
    for sweep in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        scale = fabs(ar[0][0]) + fabs(ar[1][1]) + fabs(ar[2][2])
        for p in range(3):
            for q in range(p + 1, 3):
                off += hypot(ar[p][q], ai[p][q])
        if off <= JACOBI_TOL * (scale + off + 1e-300):
            break
        for p in range(3):
            for q in range(p + 1, 3):
                r = hypot(ar[p][q], ai[p][q])
                if r == 0.0:
                    continue
                phr = ar[p][q] / r
                phi = ai[p][q] / r
                tau = (ar[q][q] - ar[p][p]) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                # diagonal update
                ar[p][p] = ar[p][p] - t * r
                ar[q][q] = ar[q][q] + t * r
                ar[p][q] = 0.0
                ai[p][q] = 0.0
                ar[q][p] = 0.0
                ai[q][p] = 0.0
                # remaining row/column
                m = 3 - p - q
                # new A[m][p] = c*A[m][p] - s*conj(ph)*A[m][q]
                # new A[m][q] = s*ph*A[m][p] + c*A[m][q]   (ph = e^{i phi})
                wpr = c * ar[m][p] - s * (phr * ar[m][q] + phi * ai[m][q])
                wpi = c * ai[m][p] - s * (phr * ai[m][q] - phi * ar[m][q])
                wqr = c * ar[m][q] + s * (phr * ar[m][p] - phi * ai[m][p])
                wqi = c * ai[m][q] + s * (phr * ai[m][p] + phi * ar[m][p])
                ar[m][p] = wpr
                ai[m][p] = wpi
                ar[m][q] = wqr
                ai[m][q] = wqi
                ar[p][m] = wpr
                ai[p][m] = -wpi
                ar[q][m] = wqr
                ai[q][m] = -wqi
    d[0] = ar[0][0]
    d[1] = ar[1][1]
    d[2] = ar[2][2]


def spectrum_from_entries(pack, int n, linv):
    """See _kernels_py.spectrum_from_entries."""
    cdef double[:, ::1] b = _maybe_transform(pack, n, linv)
    cdef Py_ssize_t P = b.shape[1]
    lam_arr = np.empty((P, n), dtype=np.float64)
    theta_arr = np.empty(P, dtype=np.float64)
    cot_arr = np.empty(P, dtype=np.float64)
    csc2_arr = np.empty(P, dtype=np.float64)
    cdef double[:, ::1] lam = lam_arr
    cdef double[::1] theta = theta_arr
    cdef double[::1] cot = cot_arr
    cdef double[::1] csc2 = csc2_arr
    cdef Py_ssize_t p
    cdef int i, j
    cdef double re, im, hyp, s, mean, disc, th, ct
    cdef double min_sin = 2.0
    cdef double d[3]
    cdef double ar[3][3]
    cdef double ai[3][3]
    cdef double tmp
    with nogil:
        for p in range(P):
            if n == 1:
                lam[p, 0] = b[0, p]
                re = b[0, p]
                im = 1.0
            elif n == 2:
                mean = 0.5 * (b[0, p] + b[1, p])
                disc = sqrt(0.25 * (b[0, p] - b[1, p]) * (b[0, p] - b[1, p])
                            + b[2, p] * b[2, p] + b[3, p] * b[3, p])
                lam[p, 0] = mean + disc
                lam[p, 1] = mean - disc
                re = b[0, p] * b[1, p] - 1.0 - (b[2, p] * b[2, p] + b[3, p] * b[3, p])
                im = b[0, p] + b[1, p]
            else:
                ar[0][0] = b[0, p]; ar[1][1] = b[1, p]; ar[2][2] = b[2, p]
                ar[0][1] = b[3, p]; ai[0][1] = b[4, p]
                ar[0][2] = b[5, p]; ai[0][2] = b[6, p]
                ar[1][2] = b[7, p]; ai[1][2] = b[8, p]
                ar[1][0] = b[3, p]; ai[1][0] = -b[4, p]
                ar[2][0] = b[5, p]; ai[2][0] = -b[6, p]
                ar[2][1] = b[7, p]; ai[2][1] = -b[8, p]
                ai[0][0] = 0.0; ai[1][1] = 0.0; ai[2][2] = 0.0
                _det3(b[0, p], b[1, p], b[2, p],
                      b[3, p], b[4, p], b[5, p], b[6, p], b[7, p], b[8, p],
                      &re, &im)
                _jacobi3(d, ar, ai)
                # descending insertion sort of three values
                for i in range(1, 3):
                    tmp = d[i]
                    j = i
                    while j > 0 and d[j - 1] < tmp:
                        d[j] = d[j - 1]
                        j -= 1
                    d[j] = tmp
                lam[p, 0] = d[0]; lam[p, 1] = d[1]; lam[p, 2] = d[2]
            th = 0.0
            for i in range(n):
                th += PI / 2.0 - atan(lam[p, i])
            theta[p] = th
            hyp = sqrt(re * re + im * im)
            s = im / hyp if hyp > 0.0 else 0.0
            if s < min_sin:
                min_sin = s
            ct = re / im
            cot[p] = ct
            csc2[p] = 1.0 + ct * ct
    return lam_arr, theta_arr, cot_arr, csc2_arr, min_sin
