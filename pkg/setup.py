from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/copt_wdc/kernels/_speedups.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    # Pure-python kernels are selected at import time when the compiled
    # extension is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)
