"""Build hook for the optional compiled kernel extension.

The package is pure Python plus numpy; the hot graph/geometry kernels have a
Cython twin in src/fanetkeys/_kernels/_fast.pyx. If Cython or a C compiler is
unavailable the extension is skipped and the numpy fallback is used at import
time, so a failed extension build never blocks installation.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "fanetkeys._kernels._fast",
                ["src/fanetkeys/_kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
