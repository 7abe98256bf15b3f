"""Build script for the optional compiled stepper kernel.

The package works without the extension (a pure-Python kernel is selected at
import time); set MAGZOLL_NO_EXT=1 to skip the build explicitly.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MAGZOLL_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "magzoll._kernel",
                    ["src/magzoll/_kernel.pyx"],
                    # contraction off keeps the stepper arithmetic identical
                    # to the pure-Python fallback, step for step
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
