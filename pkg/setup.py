"""Build hook for the optional compiled kernel backend.

The package works without the extension (a numpy fallback is selected at
import time), so a missing Cython or compiler only costs speed.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("WHFF_SKIP_EXTENSION") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension(
                "whff._kernels",
                ["src/whff/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API",
                                "NPY_1_7_API_VERSION")],
            )],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
