"""Numba-compiled direct convolution kernels for large spatial kernels.

im2col + GEMM wins for 3x3 kernels, but the 9x9 stem/head convolutions
would materialize an 81x-duplicated column matrix; the direct loops below
stay within memory bandwidth instead. Width stride must be 1 (all users
comply). Falls back to None when numba is unavailable; callers must check
HAVE_NUMBA.
"""

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f
        return deco


@njit(cache=True)
def conv_forward(xp, k, out, sh):
    """out[n,o,i,j] += sum_cuv k[o,c,u,v] * xp[n,c,i*sh+u,j+v]; xp padded."""
    n, ci = xp.shape[0], xp.shape[1]
    co, kh, kw = k.shape[0], k.shape[2], k.shape[3]
    ho, wo = out.shape[2], out.shape[3]
    for ni in range(n):
        for oi in range(co):
            for i in range(ho):
                orow = out[ni, oi, i]
                for c in range(ci):
                    for u in range(kh):
                        xrow = xp[ni, c, i * sh + u]
                        for v in range(kw):
                            kv = k[oi, c, u, v]
                            for j in range(wo):
                                orow[j] += kv * xrow[v + j]


@njit(cache=True, fastmath=True)
def conv_grad_kernel(xp, g, gk, sh):
    """gk[o,c,u,v] += sum_nij g[n,o,i,j] * xp[n,c,i*sh+u,j+v]; xp padded."""
    n, ci = xp.shape[0], xp.shape[1]
    co, kh, kw = gk.shape[0], gk.shape[2], gk.shape[3]
    ho, wo = g.shape[2], g.shape[3]
    for ni in range(n):
        for oi in range(co):
            for i in range(ho):
                grow = g[ni, oi, i]
                for c in range(ci):
                    for u in range(kh):
                        xrow = xp[ni, c, i * sh + u]
                        for v in range(kw):
                            acc = 0.0
                            for j in range(wo):
                                acc += grow[j] * xrow[v + j]
                            gk[oi, c, u, v] += acc


def direct_conv2d(xp, kernel, ho, wo, sh):
    out = np.zeros((xp.shape[0], kernel.shape[0], ho, wo), dtype=xp.dtype)
    conv_forward(xp, np.ascontiguousarray(kernel), out, sh)
    return out


def direct_grad_kernel(xp, g, kshape, sh):
    gk = np.zeros(kshape, dtype=xp.dtype)
    conv_grad_kernel(xp, np.ascontiguousarray(g), gk, sh)
    return gk
