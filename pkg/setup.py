"""Build script: compiles the optional MLP kernel extension.

The extension is a speedup only; if compilation fails (no compiler, no
Cython) the package installs anyway and falls back to the NumPy kernels
at import time.
"""

import sys

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "mmsflow._kernels._mlp_cy",
                ["src/mmsflow/_kernels/_mlp_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover
    print(f"mmsflow: skipping compiled kernels ({exc})", file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
