"""Build script for the compiled ray-tracing kernels.

The extension is optional: if Cython or a C compiler is unavailable the
package installs anyway and falls back to the pure-numpy kernels at import
time (see drrtrace._kernels).
"""

from setuptools import setup
from setuptools.extension import Extension


def make_extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "drrtrace._kernels._native",
        ["src/drrtrace/_kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=make_extensions())
