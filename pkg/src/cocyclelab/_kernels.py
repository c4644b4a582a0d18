"""Compiled inner loops for renormalised 2x2 products."""
import numpy as np
from numba import njit

RESCALE_AT = 2.0


@njit(cache=True, nogil=True)
def scaled_product_chunk(mats, state, logs, renorms):
    """Left-multiply ``state[p]`` by ``mats[p, 0], mats[p, 1], ...`` in order.

    ``state`` holds P running products with Frobenius norm kept below
    ``RESCALE_AT``; every rescale adds its log factor to ``logs[p]``.
    """
    P, n = mats.shape[0], mats.shape[1]
    for p in range(P):
        s00 = state[p, 0, 0]
        s01 = state[p, 0, 1]
        s10 = state[p, 1, 0]
        s11 = state[p, 1, 1]
        acc = logs[p]
        cnt = renorms[p]
        for j in range(n):
            m00 = mats[p, j, 0, 0]
            m01 = mats[p, j, 0, 1]
            m10 = mats[p, j, 1, 0]
            m11 = mats[p, j, 1, 1]
            t00 = m00 * s00 + m01 * s10
            t01 = m00 * s01 + m01 * s11
            t10 = m10 * s00 + m11 * s10
            t11 = m10 * s01 + m11 * s11
            f = (t00.real * t00.real + t00.imag * t00.imag
                 + t01.real * t01.real + t01.imag * t01.imag
                 + t10.real * t10.real + t10.imag * t10.imag
                 + t11.real * t11.real + t11.imag * t11.imag)
            if f > RESCALE_AT * RESCALE_AT:
                r = np.sqrt(f)
                t00 /= r
                t01 /= r
                t10 /= r
                t11 /= r
                acc += np.log(r)
                cnt += 1
            s00, s01, s10, s11 = t00, t01, t10, t11
        state[p, 0, 0] = s00
        state[p, 0, 1] = s01
        state[p, 1, 0] = s10
        state[p, 1, 1] = s11
        logs[p] = acc
        renorms[p] = cnt


@njit(cache=True, nogil=True)
def right_product_chunk(mats, state, logs):
    """Right-multiply ``state[p]`` by ``mats[p, 0], mats[p, 1], ...`` in order."""
    P, n = mats.shape[0], mats.shape[1]
    for p in range(P):
        s00 = state[p, 0, 0]
        s01 = state[p, 0, 1]
        s10 = state[p, 1, 0]
        s11 = state[p, 1, 1]
        acc = logs[p]
        for j in range(n):
            m00 = mats[p, j, 0, 0]
            m01 = mats[p, j, 0, 1]
            m10 = mats[p, j, 1, 0]
            m11 = mats[p, j, 1, 1]
            t00 = s00 * m00 + s01 * m10
            t01 = s00 * m01 + s01 * m11
            t10 = s10 * m00 + s11 * m10
            t11 = s10 * m01 + s11 * m11
            f = (t00.real * t00.real + t00.imag * t00.imag
                 + t01.real * t01.real + t01.imag * t01.imag
                 + t10.real * t10.real + t10.imag * t10.imag
                 + t11.real * t11.real + t11.imag * t11.imag)
            if f > RESCALE_AT * RESCALE_AT:
                r = np.sqrt(f)
                t00 /= r
                t01 /= r
                t10 /= r
                t11 /= r
                acc += np.log(r)
            s00, s01, s10, s11 = t00, t01, t10, t11
        state[p, 0, 0] = s00
        state[p, 0, 1] = s01
        state[p, 1, 0] = s10
        state[p, 1, 1] = s11
        logs[p] = acc
