"""Benchmark the compiled FFT kernel against the pure-Python fallback.

Run with:  python3 benchmarks/bench_fft.py
"""
import argparse
import timeit

import numpy as np

from maskfusion._kernels import _fft_py

try:
    from maskfusion._kernels import _fft_ext
except ImportError:
    _fft_ext = None


def bench(fn, frames, repeats):
    best = min(timeit.repeat(lambda: fn(frames), number=1, repeat=repeats))
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=2048, help="batch size")
    parser.add_argument("--size", type=int, default=512, help="fft length (power of two)")
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    frames = rng.standard_normal((args.frames, args.size)) + 1j * rng.standard_normal(
        (args.frames, args.size)
    )

    print(f"batched {args.size}-point fft, {args.frames} frames, best of {args.repeats}")
    t_py = bench(_fft_py.fft_batch, frames, args.repeats)
    print(f"  python : {1000 * t_py:8.2f} ms")
    if _fft_ext is None:
        print("  ext    : not built (pip install -e . --no-build-isolation)")
    else:
        t_ext = bench(_fft_ext.fft_batch, frames, args.repeats)
        print(f"  ext    : {1000 * t_ext:8.2f} ms  ({t_py / t_ext:.2f}x vs python)")
        out_py = _fft_py.fft_batch(frames)
        out_ext = _fft_ext.fft_batch(frames)
        print(f"  agreement: max abs diff {np.max(np.abs(out_py - out_ext)):.2e}")

    # end-to-end analysis/synthesis timing on a 1 s utterance
    from maskfusion.dsp import Waveform, istft, stft

    wave = Waveform(rng.uniform(-0.5, 0.5, 16000))
    t = min(timeit.repeat(lambda: istft(stft(wave)), number=1, repeat=args.repeats))
    from maskfusion._kernels import BACKEND

    print(f"stft+istft, 1 s at 16 kHz ({BACKEND} backend): {1000 * t:.2f} ms")


if __name__ == "__main__":
    main()
