from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python kernels are used at runtime
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("nctomo.engine._kernels", ["src/nctomo/engine/_kernels.pyx"],
                   extra_compile_args=["-O3"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
