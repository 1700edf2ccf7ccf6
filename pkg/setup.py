"""Build the optional compiled kernel core.

The Cython extension is optional: when Cython or a C compiler is missing the
package installs without it and ``noisybq._backend`` falls back to the NumPy
implementation in ``_kernels_py``.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("NOISYBQ_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "noisybq._kernels_ext",
                    ["src/noisybq/_kernels_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
