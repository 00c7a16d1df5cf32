"""FFT kernel backend selection.

Prefers the compiled extension; falls back to the numpy implementation.
Set MASKFUSION_FFT_BACKEND=python (or ext) to force a backend.
"""
import os

_forced = os.environ.get("MASKFUSION_FFT_BACKEND")

if _forced == "python":
    from ._fft_py import fft_batch
    BACKEND = "python"
elif _forced == "ext":
    from ._fft_ext import fft_batch
    BACKEND = "ext"
else:
    try:
        from ._fft_ext import fft_batch
        BACKEND = "ext"
    except ImportError:
        from ._fft_py import fft_batch
        BACKEND = "python"

from ._fft_py import bit_reverse_table

__all__ = ["fft_batch", "bit_reverse_table", "BACKEND"]
