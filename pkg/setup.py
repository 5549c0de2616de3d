"""Build script: compiles the optional coordinate-descent extension.

The package works without the extension (a pure-NumPy kernel is selected at
import time), so a failed compile downgrades to a plain-Python install instead
of aborting.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible; warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the C extension failed ({exc}); "
            "falling back to the pure-Python kernel.",
            file=sys.stderr,
        )


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        OptionalBuildExt._warn(exc)
        return []
    return cythonize(
        ["src/tenmtl/_cd_fast.pyx"],
        compiler_directives={"language_level": 3},
        include_path=[np.get_include()],
    )


setup(
    ext_modules=extensions(),
    include_dirs=[],
    cmdclass={"build_ext": OptionalBuildExt},
)
