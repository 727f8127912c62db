import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; diagkit falls back to _smo_py
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("DIAGKIT_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "diagkit._smo",
                ["src/diagkit/_smo.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # no fused multiply-add: keeps results bit-identical to the numpy fallback
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
