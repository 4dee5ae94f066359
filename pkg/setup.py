"""Build script: compiles the optional accelerator extension when Cython and a
C compiler are available.  The package works without it (numpy fallback)."""

import os

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    if not os.path.exists("src/denma/_kernels.pyx"):
        raise ImportError("no extension source")
    ext_modules = cythonize(
        [
            Extension(
                "denma._kernels",
                ["src/denma/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
