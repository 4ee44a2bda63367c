import os

from setuptools import Extension, setup

# The compiled kernels are an optional speedup: the package falls back to the
# pure-numpy implementations when the extension is absent (or LGQ_NO_EXT=1).
ext_modules = []
if not os.environ.get("LGQ_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext = Extension(
            "lgqsmooth._core._kernels_cy",
            ["src/lgqsmooth/_core/_kernels_cy.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError as err:  # pragma: no cover - build-environment dependent
        print(f"warning: building without compiled kernels ({err})")

setup(ext_modules=ext_modules)
