import os

from setuptools import setup

ext_modules = []
if not os.environ.get("ROBUST_OCE_PURE_PYTHON"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "robust_oce.lp._kernel",
                    ["src/robust_oce/lp/_kernel.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # no Cython available: the numpy kernel is used at runtime
        ext_modules = []

setup(ext_modules=ext_modules)
