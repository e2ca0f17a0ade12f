# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled phasor sums for domain-sequence spectra.

Both functions return ``sum_b coef[b] * exp(1j * dk * z[b])`` for every
``dk`` and release the GIL while summing.
"""
import numpy as np
from libc.math cimport sin, cos

# exact phasors are recomputed this often in the uniform-grid recurrence
DEF RESEED = 64


def phasor_sum(const double[::1] z, const double[::1] coef, const double[::1] dk):
    cdef Py_ssize_t nb = z.shape[0], nk = dk.shape[0], i, j
    re_arr = np.zeros(nk)
    im_arr = np.zeros(nk)
    cdef double[::1] re = re_arr, im = im_arr
    cdef double k, ph, sr, si
    with nogil:
        for i in range(nk):
            k = dk[i]
            sr = 0.0
            si = 0.0
            for j in range(nb):
                ph = k * z[j]
                sr += coef[j] * cos(ph)
                si += coef[j] * sin(ph)
            re[i] = sr
            im[i] = si
    return re_arr + 1j * im_arr


def phasor_sum_uniform(const double[::1] z, const double[::1] coef, double dk0, double ddk, Py_ssize_t n):
    """Same sum on the grid ``dk0 + i*ddk`` using a per-boundary phasor recurrence."""
    cdef Py_ssize_t nb = z.shape[0], i, j
    re_arr = np.zeros(n)
    im_arr = np.zeros(n)
    cdef double[::1] re = re_arr, im = im_arr
    cdef double zj, c, pr, pi, rr, ri, t
    with nogil:
        for j in range(nb):
            zj = z[j]
            c = coef[j]
            rr = cos(ddk * zj)
            ri = sin(ddk * zj)
            pr = 0.0
            pi = 0.0
            for i in range(n):
                if i % RESEED == 0:
                    pr = cos((dk0 + i * ddk) * zj)
                    pi = sin((dk0 + i * ddk) * zj)
                else:
                    t = pr * rr - pi * ri
                    pi = pr * ri + pi * rr
                    pr = t
                re[i] += c * pr
                im[i] += c * pi
    return re_arr + 1j * im_arr
