"""Pure-Python (numpy-vectorized) radix-2 FFT kernel.

Fallback used when the compiled extension is not available. Same
decimation-in-time butterfly schedule as the Cython kernel, vectorized
across the batch and butterfly axes.
"""
import numpy as np


def bit_reverse_table(n):
    """Index permutation that sorts a length-n sequence into bit-reversed order."""
    if n <= 0 or n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    rev = np.zeros(n, dtype=np.intp)
    for i in range(1, n):
        rev[i] = (rev[i >> 1] >> 1) | ((i & 1) * (n >> 1))
    return rev


def fft_batch(frames, inverse=False):
    """Transform each row of a (batch, n) array; n must be a power of two.

    Forward uses the e^{-2pi i jk/n} convention; inverse conjugates the
    twiddles and applies the 1/n normalization.
    """
    out = np.array(frames, dtype=np.complex128, copy=True)
    if out.ndim != 2:
        raise ValueError("expected a 2-D (batch, n) array")
    n = out.shape[1]
    out = out[:, bit_reverse_table(n)]
    sign = 1.0 if inverse else -1.0
    half = 1
    while half < n:
        tw = np.exp(sign * 1j * np.pi * np.arange(half) / half)
        v = out.reshape(out.shape[0], -1, 2 * half)
        t = v[:, :, half:] * tw
        v[:, :, half:] = v[:, :, :half] - t
        v[:, :, :half] += t
        half *= 2
    if inverse:
        out /= n
    return out
