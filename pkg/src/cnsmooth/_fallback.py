"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def resolvent_sweep(W, coef, rhs, x_in, x_out, change):
    np.multiply(W.csr @ x_in, coef, out=x_out)
    x_out += rhs
    np.abs(x_out - x_in).max(axis=0, out=change)
