"""Build script for the optional compiled kernels.

The package works without the extension (a pure-Python fallback is selected at
import time), so any build failure here should be treated as "install without
the fast kernels" rather than a hard error.  Set CEC_REUSE_SKIP_EXT=1 to skip
the extension build explicitly.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CEC_REUSE_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "cecreuse._kernels._fast",
                    ["src/cecreuse/_kernels/_fast.pyx"],
                    # -ffp-contract=off keeps double arithmetic bit-identical
                    # to the pure-Python fallback (no fused multiply-add).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
