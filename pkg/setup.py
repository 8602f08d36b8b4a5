"""Build script for the compiled kernel core.

The extension is optional: if the C toolchain or Cython is unavailable the
package installs anyway and falls back to the pure-numpy kernels in
``scrfocus._kernels._pure``.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Try to build the accelerated core; never fail the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            warnings.warn(f"skipping compiled kernels ({exc}); using pure-numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            warnings.warn(f"skipping {ext.name} ({exc}); using pure-numpy fallback")


def make_extensions():
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "scrfocus._kernels._core",
        ["src/scrfocus/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


try:
    extensions = make_extensions()
except Exception as exc:  # noqa: BLE001 - missing cython/numpy at build time
    warnings.warn(f"compiled kernels disabled ({exc})")
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
