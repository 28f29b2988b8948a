"""Compiled site loops over flattened link arrays.

Layout: ``links[site, mu, q]`` with ``site`` the C-order flat index of the
4-torus, ``fwd[site, mu]`` / ``bwd[site, mu]`` the neighbour tables.  Loops
write one output slot per site, so results do not depend on the thread count.
"""

import math

import numpy as np
from numba import njit, prange

PLANES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]], dtype=np.int64)


@njit(cache=True, inline="always")
def _ld(links, x, mu):
    return (links[x, mu, 0], links[x, mu, 1], links[x, mu, 2], links[x, mu, 3])


@njit(cache=True, inline="always")
def _dag(a):
    return (a[0], -a[1], -a[2], -a[3])


@njit(cache=True, inline="always")
def _mul(a, b):
    return (
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + b[0] * a[1] - (a[2] * b[3] - a[3] * b[2]),
        a[0] * b[2] + b[0] * a[2] - (a[3] * b[1] - a[1] * b[3]),
        a[0] * b[3] + b[0] * a[3] - (a[1] * b[2] - a[2] * b[1]),
    )


@njit(cache=True, inline="always")
def _plaq(links, fwd, x, mu, nu):
    a = _mul(_ld(links, x, mu), _ld(links, fwd[x, mu], nu))
    b = _mul(_dag(_ld(links, fwd[x, nu], mu)), _dag(_ld(links, x, nu)))
    return _mul(a, b)


@njit(cache=True, parallel=True)
def plaquette_field(links, fwd):
    nsite = links.shape[0]
    out = np.empty((nsite, 6, 4))
    for x in prange(nsite):
        for p in range(6):
            q = _plaq(links, fwd, x, PLANES[p, 0], PLANES[p, 1])
            for k in range(4):
                out[x, p, k] = q[k]
    return out


@njit(cache=True, parallel=True)
def weighted_force(links, fwd, bwd, weight, scale):
    """``scale * sum_plaq weight(anchor) * vec(plaquette through (x, mu))``."""
    nsite = links.shape[0]
    out = np.empty((nsite, 4, 3))
    for x in prange(nsite):
        for mu in range(4):
            u = _ld(links, x, mu)
            s1 = 0.0
            s2 = 0.0
            s3 = 0.0
            for nu in range(4):
                if nu == mu:
                    continue
                up = _mul(
                    _mul(u, _ld(links, fwd[x, mu], nu)),
                    _mul(_dag(_ld(links, fwd[x, nu], mu)), _dag(_ld(links, x, nu))),
                )
                w = weight[x]
                s1 += w * up[1]
                s2 += w * up[2]
                s3 += w * up[3]
                y = bwd[x, nu]
                dn = _mul(
                    _mul(u, _dag(_ld(links, fwd[y, mu], nu))),
                    _mul(_dag(_ld(links, y, mu)), _ld(links, y, nu)),
                )
                w = weight[y]
                s1 += w * dn[1]
                s2 += w * dn[2]
                s3 += w * dn[3]
            out[x, mu, 0] = scale * s1
            out[x, mu, 1] = scale * s2
            out[x, mu, 2] = scale * s3
    return out


@njit(cache=True, parallel=True)
def clover_field(links, fwd, bwd):
    """``a^2 F_{mu nu}`` from the four-leaf clover, planes in ``PLANES`` order."""
    nsite = links.shape[0]
    out = np.empty((nsite, 6, 3))
    for x in prange(nsite):
        for p in range(6):
            mu = PLANES[p, 0]
            nu = PLANES[p, 1]
            xm = bwd[x, mu]
            xn = bwd[x, nu]
            xmn = bwd[xm, nu]
            q1 = _plaq(links, fwd, x, mu, nu)
            q2 = _mul(
                _mul(_ld(links, x, nu), _dag(_ld(links, fwd[xm, nu], mu))),
                _mul(_dag(_ld(links, xm, nu)), _ld(links, xm, mu)),
            )
            q3 = _mul(
                _mul(_dag(_ld(links, xm, mu)), _dag(_ld(links, xmn, nu))),
                _mul(_ld(links, xmn, mu), _ld(links, xn, nu)),
            )
            q4 = _mul(
                _mul(_dag(_ld(links, xn, nu)), _ld(links, xn, mu)),
                _mul(_ld(links, fwd[xn, mu], nu), _dag(_ld(links, x, mu))),
            )
            # project(sum/4) = -2 vec(sum)/4
            for k in range(3):
                out[x, p, k] = -0.5 * (q1[k + 1] + q2[k + 1] + q3[k + 1] + q4[k + 1])
    return out


@njit(cache=True, parallel=True)
def left_mul_exp(links, gen):
    """``exp(gen) * links`` link by link, renormalised."""
    nsite = links.shape[0]
    out = np.empty_like(links)
    for x in prange(nsite):
        for mu in range(4):
            c1 = gen[x, mu, 0]
            c2 = gen[x, mu, 1]
            c3 = gen[x, mu, 2]
            th = math.sqrt(c1 * c1 + c2 * c2 + c3 * c3)
            if th < 1e-6:
                hs = 0.5 - th * th / 48.0
            else:
                hs = math.sin(0.5 * th) / th
            e = (math.cos(0.5 * th), -hs * c1, -hs * c2, -hs * c3)
            r = _mul(e, _ld(links, x, mu))
            n = math.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3])
            for k in range(4):
                out[x, mu, k] = r[k] / n
    return out
