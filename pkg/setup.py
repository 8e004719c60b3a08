# Builds the compiled kernel extension. The package works without it (a pure
# numpy fallback is selected at import), so a missing Cython only costs speed.
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension
    import numpy as np

    ext_modules = cythonize(
        [
            Extension(
                "derainseq._kernels",
                ["src/derainseq/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off: the fallback and the compiled kernels must
                # produce bit-identical float64 results; FMA contraction would
                # change roundings.
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
