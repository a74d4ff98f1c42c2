# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels; mirrors ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


cdef inline int _parity(long long v) nogil:
    return __builtin_popcountll(v) & 1


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline double complex _ipow(int ny) nogil:
    ny = ny & 3
    if ny == 0:
        return 1.0
    elif ny == 1:
        return 1j
    elif ny == 2:
        return -1.0
    return -1j


def apply_pauli(const double complex[::1] psi, long long x, long long z, int ny):
    cdef Py_ssize_t dim = psi.shape[0], j
    cdef long long jx
    cdef double complex ph = _ipow(ny)
    out = np.empty(dim, dtype=np.complex128)
    cdef double complex[::1] o = out
    with nogil:
        for j in range(dim):
            jx = j ^ x
            if _parity(jx & z):
                o[j] = -ph * psi[jx]
            else:
                o[j] = ph * psi[jx]
    return out


def expval_pauli_state(const double complex[::1] psi, long long x, long long z, int ny):
    cdef Py_ssize_t dim = psi.shape[0], j
    cdef long long jx
    cdef double complex acc = 0, ph = _ipow(ny), v
    with nogil:
        for j in range(dim):
            jx = j ^ x
            v = psi[j].real * psi[jx].real + psi[j].imag * psi[jx].imag \
                + 1j * (psi[j].real * psi[jx].imag - psi[j].imag * psi[jx].real)
            if _parity(jx & z):
                acc -= v
            else:
                acc += v
    return (ph * acc).real


def expval_pauli_density(const double complex[:, ::1] rho, long long x, long long z, int ny):
    cdef Py_ssize_t dim = rho.shape[0], j
    cdef long long jx
    cdef double complex acc = 0
    with nogil:
        for j in range(dim):
            jx = j ^ x
            if _parity(jx & z):
                acc -= rho[jx, j]
            else:
                acc += rho[jx, j]
    return (_ipow(ny) * acc).real


def pauli_channel(const double complex[:, ::1] rho, xs, zs, weights):
    cdef Py_ssize_t dim = rho.shape[0], a, b, k, nk = len(xs)
    cdef long long ax, bx, x, z
    cdef double w
    cdef int sa
    out = np.zeros((dim, dim), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef long long[::1] xv = np.asarray(xs, dtype=np.int64)
    cdef long long[::1] zv = np.asarray(zs, dtype=np.int64)
    cdef double[::1] wv = np.asarray(weights, dtype=np.float64)
    with nogil:
        for k in range(nk):
            w = wv[k]
            if w == 0:
                continue
            x = xv[k]
            z = zv[k]
            for a in range(dim):
                ax = a ^ x
                sa = _parity(ax & z)
                for b in range(dim):
                    bx = b ^ x
                    if sa ^ _parity(bx & z):
                        o[a, b] -= w * rho[ax, bx]
                    else:
                        o[a, b] += w * rho[ax, bx]
    return out


def dephase(const double complex[:, ::1] rho, int qubit, double p):
    cdef Py_ssize_t dim = rho.shape[0], a, b
    cdef double f = 1.0 - 2.0 * p
    out = np.empty((dim, dim), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    with nogil:
        for a in range(dim):
            for b in range(dim):
                if ((a >> qubit) ^ (b >> qubit)) & 1:
                    o[a, b] = f * rho[a, b]
                else:
                    o[a, b] = rho[a, b]
    return out


def collective_dephase(const double complex[:, ::1] rho, int n_qubits, double sigma2):
    cdef Py_ssize_t dim = rho.shape[0], a, b
    cdef int d
    out = np.empty((dim, dim), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    with nogil:
        for a in range(dim):
            for b in range(dim):
                # magnetization difference: 2 * (popcount(b) - popcount(a))
                d = 2 * (__builtin_popcountll(b) - __builtin_popcountll(a))
                o[a, b] = rho[a, b] * exp(-sigma2 * d * d / 8.0)
    return out


def parity_expectations(outcomes, counts, zmasks):
    cdef long long[::1] ov = np.asarray(outcomes, dtype=np.int64)
    cdef double[::1] cv = np.asarray(counts, dtype=np.float64)
    cdef long long[::1] mv = np.asarray(zmasks, dtype=np.int64)
    cdef Py_ssize_t i, k, n = ov.shape[0], nm = mv.shape[0]
    cdef double total = 0, acc
    res = np.empty(nm, dtype=np.float64)
    cdef double[::1] r = res
    for i in range(n):
        total += cv[i]
    for k in range(nm):
        acc = 0
        for i in range(n):
            if _parity(ov[i] & mv[k]):
                acc -= cv[i]
            else:
                acc += cv[i]
        r[k] = acc / total
    return res
