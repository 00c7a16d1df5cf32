"""Strict WAV I/O: RIFF/WAVE, 16-bit PCM, mono, 16 kHz only.

No silent conversion; anything else is rejected with a descriptive error
carrying the byte offset of the offending field.
"""
import struct

import numpy as np

from .dsp import SAMPLE_RATE, Waveform
from .ioutil import atomic_write_bytes


class FormatError(ValueError):
    """Malformed or unsupported input file."""


def wav_read(path) -> Waveform:
    """Read a PCM16 mono 16 kHz WAV; samples scaled to [-1, 1) by 1/32768."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 12 or raw[:4] != b"RIFF":
        raise FormatError(f"{path}: missing RIFF magic at byte 0")
    if raw[8:12] != b"WAVE":
        raise FormatError(f"{path}: missing WAVE form type at byte 8")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise FormatError(f"{path}: chunk {chunk_id!r} truncated at byte {pos}")
        if chunk_id == b"fmt ":
            fmt = (pos + 8, body)
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise FormatError(f"{path}: no fmt chunk found")
    if data is None:
        raise FormatError(f"{path}: no data chunk found")

    fmt_offset, body = fmt
    if len(body) < 16:
        raise FormatError(f"{path}: fmt chunk too short at byte {fmt_offset}")
    audio_format, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", body, 0)
    if audio_format != 1:
        raise FormatError(
            f"{path}: unsupported audio format {audio_format} at byte {fmt_offset} "
            "(only PCM is accepted)"
        )
    if channels != 1:
        raise FormatError(
            f"{path}: {channels} channels at byte {fmt_offset + 2}; only mono is accepted"
        )
    if rate != SAMPLE_RATE:
        raise FormatError(
            f"{path}: sample rate {rate} Hz at byte {fmt_offset + 4}; "
            f"this pipeline requires {SAMPLE_RATE} Hz (no resampling is performed)"
        )
    if bits != 16:
        raise FormatError(
            f"{path}: {bits}-bit samples at byte {fmt_offset + 14}; only 16-bit is accepted"
        )
    samples = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
    return Waveform(samples.astype(np.float64) / 32768.0, SAMPLE_RATE)


def wav_write(path, w: Waveform) -> None:
    """Write a PCM16 mono WAV atomically (temp file + rename)."""
    if w.sample_rate != SAMPLE_RATE:
        raise FormatError(f"refusing to write {w.sample_rate} Hz audio; expected {SAMPLE_RATE}")
    pcm = np.clip(np.rint(w.samples * 32768.0), -32768, 32767).astype("<i2")
    body = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(body)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, 1, SAMPLE_RATE, SAMPLE_RATE * 2, 2, 16
    )
    header += b"data" + struct.pack("<I", len(body))
    atomic_write_bytes(path, header + body)
