"""Build script for the optional compiled step kernels.

The package works without the extension (pure-Python fallback selected at
import time); compiling just makes year-long rollouts faster. No -ffast-math:
the compiled kernels must stay bit-identical to the Python lane.
"""
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "vppsim._speedups",
                ["src/vppsim/_speedups.pyx"],
                extra_compile_args=["-O2"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": False,
        },
    )

setup(ext_modules=extensions)
