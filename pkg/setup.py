"""Build script for the optional Cython kernels.

The package works without a compiler: if Cython or a C toolchain is missing,
the extension is skipped and ``regretlab._kernels`` falls back to numpy.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("REGRETLAB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "regretlab._kernels._ckernels",
                    ["src/regretlab/_kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
