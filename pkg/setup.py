import os

from setuptools import setup

ext_modules = []
if os.environ.get("QPM_NOISE_NO_EXT", "") in ("", "0"):
    try:
        import numpy  # noqa: F401
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("qpm_noise._kernels", ["src/qpm_noise/_kernels.pyx"], extra_compile_args=["-O3"])],
            language_level=3,
        )
    except ImportError:
        # no Cython: the numpy fallback is used at import time
        ext_modules = []

setup(ext_modules=ext_modules)
