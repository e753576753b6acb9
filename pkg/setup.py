"""Build the optional Cython kernels.

If Cython or a C compiler is unavailable the package still installs and
``ecokit._kernels`` falls back to the pure-Python implementations.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("ECOKIT_NO_EXTENSIONS"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "ecokit._kernels._core",
                    ["src/ecokit/_kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
