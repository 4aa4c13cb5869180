from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # build without the compiled kernel
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("capstone_emu.revtree._linked",
                   ["src/capstone_emu/revtree/_linked.pyx"])],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )

setup(ext_modules=ext_modules)
