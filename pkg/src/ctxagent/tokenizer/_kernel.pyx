# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled token-counting kernel.

Single pass over the string's code points; semantics are identical to
``ctxagent.tokenizer._fallback.count_tokens``.
"""


def count_tokens(str text not None):
    cdef Py_ssize_t i, n = len(text)
    cdef Py_UCS4 ch
    cdef Py_ssize_t count = 0
    cdef bint in_run = False
    for i in range(n):
        ch = text[i]
        if (48 <= ch <= 57) or (65 <= ch <= 90) or (97 <= ch <= 122):
            if not in_run:
                count += 1
                in_run = True
        else:
            count += 1
            in_run = False
    return count
