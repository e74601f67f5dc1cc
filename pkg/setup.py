"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure NumPy twin is selected at
import time), so a failed compile only costs speed, not functionality.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dhymflow._kernels",
                ["src/dhymflow/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(
        "dhymflow: Cython kernel build skipped (%s); "
        "falling back to the pure NumPy kernels.\n" % exc
    )

setup(ext_modules=ext_modules)
