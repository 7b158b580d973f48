import os

from setuptools import setup

# The compiled kernels are an optional accelerator: the package falls back to
# the NumPy implementations at import time if the extension is missing.
# Set STILLMAP_PURE=1 to skip building it entirely.
ext_modules = []
if not os.environ.get("STILLMAP_PURE"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "stillmap.kernels._compiled",
                    ["src/stillmap/kernels/_compiled.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
