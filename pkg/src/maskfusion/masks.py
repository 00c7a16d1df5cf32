"""Oracle T-F masks, the delta/gamma fusion rule, and mask application.

IRM: soft mask (X^2 / (X^2 + N^2))^beta from oracle speech/noise energies.
TBM: binary mask marking bins whose clean magnitude exceeds the
per-frequency temporal mean.
Fusion: keep the IRM where the (estimated) TBM exceeds delta, scale it by
gamma elsewhere.
"""
import csv
import io
import struct
from dataclasses import dataclass

import numpy as np

from .dsp import ComplexSpectrogram, MagnitudeSpectrogram, Waveform, istft, stft
from .ioutil import atomic_write_bytes, atomic_write_text

SOFT = "soft"
BINARY = "binary"

MASK_MAGIC = b"MFMK"
MASK_VERSION = 1

# Guard for silent bins where X^2 + N^2 underflows to nothing.
_ENERGY_EPS = 1e-12


@dataclass(frozen=True)
class Mask:
    """Real-valued T-F gain grid, soft ([0,1]) or binary ({0,1})."""

    data: np.ndarray
    kind: str = SOFT

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("mask must be 2-D (frames, bins)")
        if self.kind == SOFT:
            if np.any(data < 0) or np.any(data > 1) or not np.all(np.isfinite(data)):
                raise ValueError("soft mask values must lie in [0, 1]")
        elif self.kind == BINARY:
            if not np.all((data == 0) | (data == 1)):
                raise ValueError("binary mask values must be exactly 0 or 1")
        else:
            raise ValueError(f"unknown mask kind {self.kind!r}")
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class FusionParams:
    """Binarization threshold delta in (0,1) and attenuation scale gamma in [0,1]."""

    delta: float
    gamma: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")


def _check_same_shape(a, b, what):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def compute_irm(
    clean: MagnitudeSpectrogram,
    noise: MagnitudeSpectrogram,
    beta: float = 0.5,
) -> Mask:
    """Ideal ratio mask (X^2 / (X^2 + N^2))^beta; 0 where both energies vanish."""
    _check_same_shape(clean.data, noise.data, "compute_irm")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    speech = clean.data**2
    total = speech + noise.data**2
    ratio = np.divide(speech, total, out=np.zeros_like(speech), where=total >= _ENERGY_EPS)
    return Mask(ratio**beta, SOFT)


def compute_tbm(clean: MagnitudeSpectrogram) -> Mask:
    """Target binary mask: 1 where X[t,f] strictly exceeds mean_t X[t,f]."""
    if clean.num_frames < 1:
        raise ValueError("spectrogram must have at least one frame")
    tau = clean.data.mean(axis=0)
    return Mask((clean.data > tau).astype(np.float64), BINARY)


def binarize(mask: Mask, delta: float) -> Mask:
    """Hard-threshold a soft mask at delta (strict comparison)."""
    return Mask((mask.data > delta).astype(np.float64), BINARY)


def fuse_masks(irm_est: Mask, tbm_est: Mask, p: FusionParams) -> Mask:
    """Keep the IRM where tbm_est > delta, attenuate it by gamma elsewhere."""
    _check_same_shape(irm_est.data, tbm_est.data, "fuse_masks")
    fused = np.where(tbm_est.data > p.delta, irm_est.data, p.gamma * irm_est.data)
    return Mask(fused, SOFT)


def apply_mask(mask: Mask, noisy: ComplexSpectrogram) -> ComplexSpectrogram:
    """Elementwise product of the real mask with the complex spectrogram."""
    _check_same_shape(mask.data, noisy.data, "apply_mask")
    return ComplexSpectrogram(mask.data * noisy.data, noisy.frame_len, noisy.hop)


def enhance(noisy: Waveform, mask: Mask) -> Waveform:
    """Mask the noisy STFT and resynthesize, trimmed to the input length."""
    spec = stft(noisy)
    out = istft(apply_mask(mask, spec))
    return Waveform(out.samples[: len(noisy)], noisy.sample_rate)


def save_mask(path, mask: Mask) -> None:
    """Write the binary mask dump: MFMK magic, version, dims, kind, f32 data."""
    kind_byte = 0 if mask.kind == SOFT else 1
    m, l = mask.shape
    header = MASK_MAGIC + struct.pack("<IIIB", MASK_VERSION, m, l, kind_byte)
    atomic_write_bytes(path, header + mask.data.astype("<f4").tobytes())


def load_mask(path) -> Mask:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MASK_MAGIC:
        raise ValueError(f"{path}: not a mask dump (bad magic at byte 0)")
    version, m, l, kind_byte = struct.unpack_from("<IIIB", raw, 4)
    if version != MASK_VERSION:
        raise ValueError(f"{path}: unsupported mask dump version {version}")
    expected = 17 + 4 * m * l
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated mask dump ({len(raw)} of {expected} bytes)")
    data = np.frombuffer(raw, dtype="<f4", offset=17).reshape(m, l).astype(np.float64)
    return Mask(data, SOFT if kind_byte == 0 else BINARY)


def mask_to_csv(path, mask: Mask) -> None:
    """Debug export, one frame per row, 6 decimal places."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf)
    for row in mask.data:
        writer.writerow([f"{v:.6f}" for v in row])
    atomic_write_text(path, buf.getvalue())
