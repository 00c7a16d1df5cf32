"""Build script for the compiled FFT kernel.

The extension is optional: if the build toolchain is unavailable the
package falls back to the pure-Python kernel at import time.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "maskfusion._kernels._fft_ext",
                ["src/maskfusion/_kernels/_fft_ext.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
