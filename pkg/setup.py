"""Build script for the optional compiled kernels.

The package is fully functional without the extension: ``radarslam.kernels``
falls back to the numpy reference implementation when the compiled module is
absent.  Build failures therefore only emit a warning instead of aborting the
install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or Cython missing
            warnings.warn(f"skipping compiled kernels ({exc}); "
                          "falling back to the pure-Python implementation")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"failed to build {ext.name} ({exc}); "
                          "falling back to the pure-Python implementation")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        warnings.warn(f"compiled kernels unavailable: {exc}")
        return []
    ext = Extension(
        "radarslam.kernels._native",
        ["src/radarslam/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        language_level="3",
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
