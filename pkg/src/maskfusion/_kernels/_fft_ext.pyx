# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled radix-2 FFT kernel operating on batches of frames."""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, M_PI

from ._fft_py import bit_reverse_table

cnp.import_array()


def fft_batch(frames, bint inverse=False):
    """Transform each row of a (batch, n) array; n must be a power of two."""
    out = np.array(frames, dtype=np.complex128, order="C", copy=True)
    if out.ndim != 2:
        raise ValueError("expected a 2-D (batch, n) array")
    cdef Py_ssize_t n = out.shape[1]
    if n <= 0 or n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    cdef cnp.intp_t[::1] rev = bit_reverse_table(n)
    cdef double complex[:, ::1] y = out
    cdef Py_ssize_t nb = out.shape[0]
    cdef double sign = 1.0 if inverse else -1.0
    cdef Py_ssize_t b, i, j, k, half, step, base, stride
    cdef double complex t, u
    cdef double ang

    # one twiddle table, reused at every stage via index striding
    tw_arr = np.empty(max(n // 2, 1), dtype=np.complex128)
    cdef double complex[::1] tw = tw_arr
    for k in range(n // 2):
        ang = sign * 2.0 * M_PI * k / n
        tw[k] = cos(ang) + 1j * sin(ang)

    for b in range(nb):
        for i in range(n):
            j = rev[i]
            if j > i:
                t = y[b, i]
                y[b, i] = y[b, j]
                y[b, j] = t

        half = 1
        while half < n:
            step = half * 2
            stride = n // step
            base = 0
            while base < n:
                for j in range(half):
                    u = y[b, base + j]
                    t = tw[j * stride] * y[b, base + j + half]
                    y[b, base + j] = u + t
                    y[b, base + j + half] = u - t
                base += step
            half = step

    if inverse:
        out /= n
    return out
