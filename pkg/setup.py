import os

import numpy as np
from setuptools import Extension, setup

extensions = []
if not os.environ.get("IDEFRONT_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python install; _fallback is used at import
        cythonize = None
    if cythonize is not None:
        extensions = cythonize(
            [
                Extension(
                    "idefront._core",
                    ["src/idefront/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=extensions)
