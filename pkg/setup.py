"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set VALVEDIAG_NO_EXT=1 to skip compiling it entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("VALVEDIAG_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "valvediag._kernels",
                    ["src/valvediag/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
