from setuptools import Extension, setup
from Cython.Build import cythonize

# The event-loop kernel is compiled; keyage.sim falls back to the pure
# engine when the extension is unavailable (see keyage/sim/__init__.py).
# FP contraction is disabled so the kernel's float accumulation stays
# bit-identical to the pure-Python engine.
setup(
    ext_modules=cythonize(
        [
            Extension(
                "keyage.sim._kernel",
                ["src/keyage/sim/_kernel.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
)
