"""STFT analysis / weighted-overlap-add synthesis on a radix-2 FFT core.

Pipeline configuration: 512-sample frames (32 ms at 16 kHz), 256-sample
hop, periodic Hamming window, one-sided 257-bin spectra.
"""
from dataclasses import dataclass, field

import numpy as np

from ._kernels import fft_batch

SAMPLE_RATE = 16000
FRAME_LEN = 512
HOP = 256


@dataclass(frozen=True)
class Waveform:
    """Mono time-domain signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("waveform must be 1-D mono")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class ComplexSpectrogram:
    """One-sided complex STFT grid, frames along axis 0."""

    data: np.ndarray  # (M, frame_len // 2 + 1) complex
    frame_len: int = FRAME_LEN
    hop: int = HOP

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2:
            raise ValueError("spectrogram must be 2-D (frames, bins)")
        if data.shape[1] != self.frame_len // 2 + 1:
            raise ValueError(
                f"expected {self.frame_len // 2 + 1} bins, got {data.shape[1]}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("spectrogram contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def num_frames(self):
        return self.data.shape[0]

    @property
    def num_bins(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class MagnitudeSpectrogram:
    """Nonnegative real magnitude grid, frames along axis 0."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("spectrogram must be 2-D (frames, bins)")
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise ValueError("magnitudes must be finite and nonnegative")
        object.__setattr__(self, "data", data)

    @property
    def num_frames(self):
        return self.data.shape[0]

    @property
    def num_bins(self):
        return self.data.shape[1]


def hamming_window(n: int) -> np.ndarray:
    """Periodic Hamming window: 0.54 - 0.46 cos(2 pi k / n).

    The periodic form (denominator n rather than n-1) keeps the 50%
    overlap-add structure exact.
    """
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / n)


def fft(x) -> np.ndarray:
    """DFT of a power-of-two-length sequence, X[j] = sum_k x[k] e^{-2pi i jk/n}."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ValueError("fft expects a 1-D sequence")
    return fft_batch(x[None, :])[0]


def ifft(x) -> np.ndarray:
    """Inverse DFT with 1/n normalization; ifft(fft(x)) == x."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ValueError("ifft expects a 1-D sequence")
    return fft_batch(x[None, :], inverse=True)[0]


def _reflect_pad(x: np.ndarray, pad: int) -> np.ndarray:
    """Reflect-pad without the edge sample repeated; handles pad > len(x)."""
    n = len(x)
    if n == 1:
        return np.full(n + 2 * pad, x[0])
    period = 2 * n - 2
    idx = np.arange(-pad, n + pad) % period
    idx = np.where(idx >= n, period - idx, idx)
    return x[idx]


def stft(w: Waveform, frame_len: int = FRAME_LEN, hop: int = HOP) -> ComplexSpectrogram:
    """Windowed short-time Fourier analysis.

    Reflect-pads hop samples at each end, zero-pads the tail so every
    input sample lands in a full frame, and keeps bins 0..frame_len/2.
    """
    if len(w) == 0:
        raise ValueError("cannot compute STFT of an empty waveform")
    if w.sample_rate != SAMPLE_RATE:
        raise ValueError(
            f"pipeline expects {SAMPLE_RATE} Hz input, got {w.sample_rate} Hz"
        )
    x = _reflect_pad(w.samples, hop)
    tail = (-(len(x) - frame_len)) % hop
    if tail:
        x = np.concatenate([x, np.zeros(tail)])
    num_frames = (len(x) - frame_len) // hop + 1
    starts = np.arange(num_frames) * hop
    frames = x[starts[:, None] + np.arange(frame_len)]
    frames = frames * hamming_window(frame_len)
    spectra = fft_batch(frames)
    return ComplexSpectrogram(spectra[:, : frame_len // 2 + 1], frame_len, hop)


def istft(s: ComplexSpectrogram) -> Waveform:
    """Weighted-overlap-add inverse of stft.

    Each frame is Hermitian-extended, inverse transformed, windowed again,
    and overlap-added; the result is divided per sample by the accumulated
    squared analysis window and the stft edge padding is trimmed. Output
    length is (M - 1) * hop; callers slice to the original length.
    """
    frame_len, hop = s.frame_len, s.hop
    half = frame_len // 2
    full = np.empty((s.num_frames, frame_len), dtype=np.complex128)
    full[:, : half + 1] = s.data
    full[:, half + 1 :] = np.conj(s.data[:, half - 1 : 0 : -1])
    frames = fft_batch(full, inverse=True).real
    window = hamming_window(frame_len)
    frames = frames * window

    out_len = (s.num_frames - 1) * hop + frame_len
    acc = np.zeros(out_len)
    wsum = np.zeros(out_len)
    wsq = window**2
    for m in range(s.num_frames):
        acc[m * hop : m * hop + frame_len] += frames[m]
        wsum[m * hop : m * hop + frame_len] += wsq
    if np.any(wsum <= 0):
        raise RuntimeError("zero accumulated window energy in overlap-add")
    acc /= wsum
    return Waveform(acc[hop:-hop] if hop else acc)


def magnitude(s: ComplexSpectrogram) -> MagnitudeSpectrogram:
    """Elementwise complex modulus."""
    return MagnitudeSpectrogram(np.abs(s.data))
