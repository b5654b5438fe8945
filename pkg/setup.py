"""Build script for the optional compiled interaction core.

The package works without the extension (a pure-numpy fallback is selected at
import time); the extension only accelerates the O(N^2) pairwise kernels.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "mkvlab._core",
                ["src/mkvlab/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
