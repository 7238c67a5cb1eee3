import os

from setuptools import Extension, setup

if os.environ.get("NOSEAUG_PURE"):
    # Skip the compiled kernels; the package falls back to the pure
    # numpy implementations at import time.
    setup()
else:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "noseaug._kernels",
        ["src/noseaug/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    setup(ext_modules=cythonize([ext], language_level="3"))
