"""Build script: compiles the optional Cython rasterizer core.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only prints a warning.
"""

import warnings

import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, cython missing, ...
            warnings.warn(f"rasterizer extension not built ({exc}); "
                          "falling back to the pure-numpy kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"rasterizer extension not built ({exc}); "
                          "falling back to the pure-numpy kernels")


try:
    from Cython.Build import cythonize
    extensions = cythonize(
        [Extension(
            "shapeloss.render._raster_cy",
            sources=["src/shapeloss/render/_raster_cy.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
