import os

from setuptools import Extension, setup

# The compiled trajectory core is optional: the package falls back to a pure
# numpy implementation when the extension is absent (FIOPROP_NO_EXT=1 skips
# the build entirely).
ext_modules = []
if os.environ.get("FIOPROP_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "fioprop._coreflow",
                    ["src/fioprop/_coreflow.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
