"""Build script for the optional compiled kernels.

The package is pure Python plus one Cython extension holding the hot
loops (KL-NMF multiplicative updates, union-find batches).  If the
extension cannot be built the install still succeeds and the package
falls back to the numpy/pure-Python implementations at import time.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class BuildFailed(Exception):
    pass


class optional_build_ext(build_ext):
    """build_ext that downgrades compiler failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        sys.stderr.write(
            "WARNING: building the compiled kernels failed (%s); "
            "installing with the pure-Python fallback only.\n" % (exc,)
        )


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        optional_build_ext._warn(exc)
        return []
    ext = Extension(
        "cryptoflow._kernels._speedups",
        ["src/cryptoflow/_kernels/_speedups.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
