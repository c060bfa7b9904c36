"""Builds the optional compiled kernel core.

The package works without the extension (a NumPy fallback is selected at
import time); set REBARSCOPE_SKIP_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("REBARSCOPE_SKIP_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "rebarscope._kernels._core",
                    ["src/rebarscope/_kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
