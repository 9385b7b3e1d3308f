import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CHAINWATCH_NO_EXT") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("chainwatch._kernels", ["src/chainwatch/_kernels.pyx"])],
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )

setup(ext_modules=ext_modules)
