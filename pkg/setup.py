from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: the pure-python fallback must reproduce the kernel
# bit-for-bit, so FMA contraction is disabled.
extensions = [
    Extension(
        "nhqubit._jumpcore",
        ["src/nhqubit/_jumpcore.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
