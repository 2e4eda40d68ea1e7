"""Numba-compiled evaluation of excitation profiles.

A profile is passed to compiled code as the flat tuple
``(code, p, a1, a2, trunc)``; see :meth:`ExcitationProfile.kernel_args`.
``p[3]`` is an overall sign so that mirrored profiles reuse the same code.
"""
import math

import numba as nb
import numpy as np

SINGLE_COOKIE = 0
PIECEWISE_COOKIES = 1
EXP_DECAY = 2
LOG_CRITICAL = 3
CUSTOM_TABLE = 4
SITE_COOKIES = 5

E = math.e


@nb.njit(cache=True, nogil=True)
def _site_mass(edges, masses, x):
    # masses[i] applies on [edges[i-1], edges[i]); masses[0] below edges[0]
    i = np.searchsorted(edges, x, side="right")
    return masses[i]


@nb.njit(cache=True, nogil=True)
def phi_value(code, p, a1, a2, trunc, x, l):
    if l > trunc:
        return 0.0
    return p[3] * _phi_untruncated(code, p, a1, a2, x, l)


@nb.njit(cache=True, nogil=True)
def _phi_untruncated(code, p, a1, a2, x, l):
    if code == SINGLE_COOKIE:
        return p[0] if l <= 1.0 else 0.0
    if code == PIECEWISE_COOKIES:
        if l <= 0.0:
            return a2[0] if a2.size > 0 else 0.0
        i = np.searchsorted(a1, l, side="left")
        if i >= a1.size:
            return 0.0
        return a2[i]
    if code == EXP_DECAY:
        return p[0] * p[1] * math.exp(-p[1] * l)
    if code == LOG_CRITICAL:
        alpha = p[0]
        if l <= E:
            return (1.0 + alpha) / E
        ll = math.log(l)
        return -alpha / (l * ll * ll)
    if code == CUSTOM_TABLE:
        n = a1.size
        if l >= a1[n - 1]:
            return a2[n - 1] if l == a1[n - 1] else 0.0
        i = np.searchsorted(a1, l, side="right") - 1
        w = (l - a1[i]) / (a1[i + 1] - a1[i])
        return a2[i] + w * (a2[i + 1] - a2[i])
    if code == SITE_COOKIES:
        return _site_mass(a1, a2, x) if l <= 1.0 else 0.0
    return 0.0


@nb.njit(cache=True, nogil=True)
def _h_untruncated(code, p, a1, a2, x, l):
    if code == SINGLE_COOKIE:
        return p[0] * min(l, 1.0)
    if code == PIECEWISE_COOKIES:
        acc = 0.0
        left = 0.0
        for i in range(a1.size):
            right = a1[i]
            if l <= right:
                return acc + a2[i] * (l - left)
            acc += a2[i] * (right - left)
            left = right
        return acc
    if code == EXP_DECAY:
        return p[0] * -math.expm1(-p[1] * l)
    if code == LOG_CRITICAL:
        alpha = p[0]
        if l <= E:
            return (1.0 + alpha) * l / E
        return 1.0 + alpha / math.log(l)
    if code == CUSTOM_TABLE:
        acc = 0.0
        for i in range(a1.size - 1):
            lo = a1[i]
            hi = a1[i + 1]
            width = hi - lo
            slope = (a2[i + 1] - a2[i]) / width
            if l <= hi:
                u = l - lo
                return acc + a2[i] * u + 0.5 * slope * u * u
            acc += 0.5 * (a2[i] + a2[i + 1]) * width
        return acc
    if code == SITE_COOKIES:
        return _site_mass(a1, a2, x) * min(l, 1.0)
    return 0.0


@nb.njit(cache=True, nogil=True)
def h_value(code, p, a1, a2, trunc, x, l):
    return p[3] * _h_untruncated(code, p, a1, a2, x, min(l, trunc))


@nb.njit(cache=True, nogil=True)
def h_array(code, p, a1, a2, trunc, x, ls):
    out = np.empty(ls.size)
    for i in range(ls.size):
        out[i] = h_value(code, p, a1, a2, trunc, x, ls[i])
    return out


@nb.njit(cache=True, nogil=True)
def phi_array(code, p, a1, a2, trunc, x, ls):
    out = np.empty(ls.size)
    for i in range(ls.size):
        out[i] = phi_value(code, p, a1, a2, trunc, x, ls[i])
    return out
