"""Build the optional compiled kernels.

If Cython or a C compiler is unavailable the package still installs and
falls back to :mod:`iqscc._kernels` at import time.
"""
from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print("warning: compiled kernels not built (%s); using pure Python" % exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print("warning: failed to build %s (%s)" % (ext.name, exc))


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    return cythonize(
        [Extension("iqscc._speedups", ["src/iqscc/_speedups.pyx"],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
