"""Pure-Python token counting, used when the compiled kernel is unavailable.

Must agree with ``_kernel.count_tokens`` on every input; the test suite
cross-checks the two implementations.
"""

import re

_ALNUM_RUN = re.compile(r"[0-9A-Za-z]+")


def count_tokens(text: str) -> int:
    """Count approximate tokens: one per ASCII-alphanumeric run, one per
    every other character (punctuation, whitespace, non-ASCII alike)."""
    runs = 0
    alnum_chars = 0
    for m in _ALNUM_RUN.finditer(text):
        runs += 1
        alnum_chars += m.end() - m.start()
    return runs + (len(text) - alnum_chars)
