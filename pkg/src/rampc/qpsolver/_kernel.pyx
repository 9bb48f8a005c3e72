# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ADMM iteration kernel.

Same contract as ``_kernel_py.admm_batch``; see that module for the math.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fmax, fmin
from scipy.linalg.cython_blas cimport dgemv, dtrsv

KERNEL_NAME = "cython"

cnp.import_array()


def admm_batch(object L, object A, object At, object q, object lo, object up,
               object rho, object rho_inv, double sigma, double alpha,
               object x0, object z0, object y0, int n_iter):
    """Run ``n_iter`` ADMM iterations; returns (x, z, y, dx, dy)."""
    cdef cnp.ndarray[double, ndim=2, mode="fortran"] L_f = \
        np.asfortranarray(L, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] A_c = \
        np.ascontiguousarray(A, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] At_c = \
        np.ascontiguousarray(At, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] q_v = np.ascontiguousarray(q, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] lo_v = np.ascontiguousarray(lo, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] up_v = np.ascontiguousarray(up, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] rho_v = np.ascontiguousarray(rho, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] rhoi_v = np.ascontiguousarray(rho_inv, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] x = np.array(x0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] z = np.array(z0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] y = np.array(y0, dtype=np.float64, copy=True)

    cdef int n = x.shape[0]
    cdef int m = z.shape[0]
    cdef cnp.ndarray[double, ndim=1] dx = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] dy = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] tmp_m = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] zt = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] xt = np.empty(n, dtype=np.float64)

    cdef double *Lp = &L_f[0, 0]
    cdef double *Ap = &A_c[0, 0]
    cdef double *Atp = &At_c[0, 0]
    cdef double one = 1.0, zero = 0.0
    cdef int inc = 1
    cdef int it, i, j
    cdef double xn, zr, zn, yn, om_alpha = 1.0 - alpha

    for it in range(n_iter):
        # tmp_m = rho*z - y
        for i in range(m):
            tmp_m[i] = rho_v[i] * z[i] - y[i]
        # xt = At @ tmp_m   (At is C-order (n,m): BLAS sees (m,n) = A, use trans)
        dgemv("T", &m, &n, &one, Atp, &m, &tmp_m[0], &inc, &zero, &xt[0], &inc)
        for j in range(n):
            xt[j] += sigma * x[j] - q_v[j]
        # solve (L L') xt = rhs in place
        dtrsv("L", "N", "N", &n, Lp, &n, &xt[0], &inc)
        dtrsv("L", "T", "N", &n, Lp, &n, &xt[0], &inc)
        # zt = A @ xt   (A is C-order (m,n): BLAS sees (n,m) = A', use trans)
        dgemv("T", &n, &m, &one, Ap, &n, &xt[0], &inc, &zero, &zt[0], &inc)
        for j in range(n):
            xn = alpha * xt[j] + om_alpha * x[j]
            dx[j] = xn - x[j]
            x[j] = xn
        for i in range(m):
            zr = alpha * zt[i] + om_alpha * z[i] + rhoi_v[i] * y[i]
            zn = fmin(fmax(zr, lo_v[i]), up_v[i])
            yn = rho_v[i] * (zr - zn)
            dy[i] = yn - y[i]
            y[i] = yn
            z[i] = zn
    return x, z, y, dx, dy
