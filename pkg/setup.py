import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled kernels are an optional accelerator: if the extension fails to
# build, the install still succeeds and the package falls back to the numpy
# backend at import time.
extensions = [
    Extension(
        "optmanet._kernels_cy",
        ["src/optmanet/_kernels_cy.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
