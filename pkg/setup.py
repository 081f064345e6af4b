import os

import numpy as np
from setuptools import setup, Extension

ext_modules = []
if not os.environ.get("CLOUDPOST_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cloudpost.spatial._kernels",
                ["src/cloudpost/spatial/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
