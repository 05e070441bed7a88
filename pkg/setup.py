"""Build script: compiles the optional Cython stepping kernels.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile only costs speed. Build with
``pip install -e . --no-build-isolation``.
"""

import numpy
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "spheredyn._stepkernels",
                ["src/spheredyn/_stepkernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
