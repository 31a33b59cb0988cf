import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("EBACKTEST_NO_EXT"):
    # The extension is optional; without it the pure-Python core is used.
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    name="ebacktest._core",
                    sources=["src/ebacktest/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    language="c",
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
