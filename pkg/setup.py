"""Build script: compiles the optional ADMM Cython kernel.

The compiled extension is a pure speedup; if Cython or a C compiler is
missing the package installs anyway and falls back to the numpy kernel.
"""
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build extensions, but never fail the install over them."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            "WARNING: building the rampc ADMM kernel failed (%s); "
            "falling back to the numpy kernel." % exc,
            file=sys.stderr,
        )


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print("WARNING: %s; skipping compiled kernel." % exc, file=sys.stderr)
        return []
    ext = Extension(
        "rampc.qpsolver._kernel",
        sources=["src/rampc/qpsolver/_kernel.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
