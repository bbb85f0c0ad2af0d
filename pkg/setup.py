"""Builds the compiled spatial-hash kernels; the package falls back to the
pure-python implementation in scene4d._kernels.fallback when the extension
is unavailable."""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # pure-python install
    numpy = None
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "scene4d._kernels._native",
        sources=["src/scene4d/_kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # -ffp-contract=off keeps squared distances bit-identical to the
        # numpy/python fallback (no FMA contraction).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    ext.optional = True
    ext_modules = cythonize([ext], language_level="3")

setup(ext_modules=ext_modules)
