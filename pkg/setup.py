"""Build script: compiles the optional Cython kernel core.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compilation only costs speed. Set
STARWAVE_NO_EXT=1 to skip the build entirely.
"""

import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("STARWAVE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "starwave._kernels._ckernels",
            ["src/starwave/_kernels/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level="3")
    except Exception as exc:  # pragma: no cover - build-env dependent
        sys.stderr.write(f"starwave: skipping compiled kernels ({exc})\n")
        ext_modules = []

setup(ext_modules=ext_modules)
