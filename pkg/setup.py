"""Build script.

The compiled stencil extension is optional: if Cython (or a working C
compiler) is unavailable, the package installs anyway and falls back to the
NumPy kernels at import time.  Set SLANTWAVE_NO_EXT=1 to skip the extension
build explicitly.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SLANTWAVE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "slantwave.kernels._stencil",
            ["src/slantwave/kernels/_stencil.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3", "-fopenmp"],
            extra_link_args=["-fopenmp"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
