"""Pure-numpy kernel backend.

Every function here has a signature-identical twin in the compiled backend
(_kernels_cy). All array arguments are 2-D C-contiguous float64. Forward
kernels allocate and return; i*-prefixed kernels accumulate in place into
their first argument and return None. Callers are responsible for domain
checks (no zero denominators, no negative sqrt inputs); the kernels do not
re-validate.
"""

import numpy as np

NAME = "python"

LN10 = float(np.log(10.0))
LOG10_CLAMP = 1e-30


def gemm(a, b, ta=False, tb=False, out=None, accumulate=False):
    """out = op(a) @ op(b), optionally accumulated into an existing buffer."""
    opa = a.T if ta else a
    opb = b.T if tb else b
    if out is None:
        return np.matmul(opa, opb)
    if accumulate:
        out += opa @ opb
    else:
        np.matmul(opa, opb, out=out)
    return out


def add(a, b):
    return a + b


def sub(a, b):
    return a - b


def mul(a, b):
    return a * b


def div(a, b):
    return a / b


def add_s(a, c):
    return a + c


def mul_s(a, c):
    return a * c


def rsub_s(c, a):
    return c - a


def rdiv_s(c, a):
    return c / a


def pow_s(a, c):
    if c == 2.0:
        return a * a
    return a ** c


def sin_(a):
    return np.sin(a)


def cos_(a):
    return np.cos(a)


def sqrt_(a):
    return np.sqrt(a)


def abs_(a):
    return np.abs(a)


def log10_(a):
    return np.log10(np.maximum(a, LOG10_CLAMP))


def relu_(a):
    return np.maximum(a, 0.0)


def badd(a, r):
    # r is (1, m), broadcast over the rows of a
    return a + r


def bmul(a, r):
    return a * r


def sum_all(a):
    return float(a.sum())


def col_sum(a):
    return a.sum(axis=0, keepdims=True)


# ---- in-place adjoint accumulators ----


def iadd(acc, g):
    acc += g


def isub(acc, g):
    acc -= g


def iadd_s(acc, g, c):
    acc += g * c


def iadd_mul(acc, g, w):
    acc += g * w


def iadd_div(acc, g, b):
    acc += g / b


def isub_ydiv(acc, g, y, b):
    # denominator rule of a quotient: acc -= g * y / b where y = a / b
    acc -= g * y / b


def iadd_dpow(acc, g, a, c):
    if c == 2.0:
        acc += g * (2.0 * a)
    else:
        acc += g * (c * a ** (c - 1.0))


def iadd_dsin(acc, g, a):
    acc += g * np.cos(a)


def iadd_dcos(acc, g, a):
    acc -= g * np.sin(a)


def iadd_dsqrt(acc, g, y):
    # y = sqrt(a) saved from the forward pass
    acc += g / (2.0 * y)


def iadd_dabs(acc, g, a):
    acc += g * np.sign(a)


def iadd_dlog10(acc, g, a):
    acc += g / (LN10 * np.maximum(a, LOG10_CLAMP))


def iadd_drelu(acc, g, a):
    acc += g * (a > 0.0)


def iadd_bmul(acc, g, r):
    acc += g * r


def iadd_colsum(acc, g):
    acc += g.sum(axis=0, keepdims=True)


def iadd_rowdot(acc, g, w):
    acc += (g * w).sum(axis=0, keepdims=True)


def iadd_fill(acc, v):
    acc += v
