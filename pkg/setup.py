"""Build script: compiles the optional token-counting extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so any build failure here degrades to the slow path rather
than breaking the install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("ctxagent.tokenizer._kernel", ["src/ctxagent/tokenizer/_kernel.pyx"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
