"""Fused loops for the per-step hot path.

No fastmath: results must be bit-reproducible and match the numpy reference
formulas in ``model`` and ``noise``.
"""

import math

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_TWO_PI = 2.0 * math.pi


@njit(cache=True)
def philox_block(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = (p1 >> _S32) ^ c1 ^ k0
        n2 = (p0 >> _S32) ^ c3 ^ k1
        c0, c1, c2, c3 = n0, p1 & _MASK, n2, p0 & _MASK
    return c0, c1, c2, c3


@njit(cache=True)
def _uniform53(hi, lo):
    a = float(hi >> np.uint64(5))
    b = float(lo >> np.uint64(6))
    return (a * 67108864.0 + b) / 9007199254740992.0


@njit(cache=True)
def philox_normals(k0, k1, step, species, paths, n_modes):
    """Box-Muller normals; block ``b`` of path ``p`` gives modes 2b, 2b+1."""
    out = np.empty((paths.shape[0], n_modes))
    n_blocks = (n_modes + 1) // 2
    st = np.uint64(step) & _MASK
    sp = np.uint64(species) & _MASK
    for q in range(paths.shape[0]):
        pq = np.uint64(paths[q]) & _MASK
        for b in range(n_blocks):
            x0, x1, x2, x3 = philox_block(st, np.uint64(b), pq, sp, k0, k1)
            u1 = _uniform53(x0, x1)
            u2 = _uniform53(x2, x3)
            radius = math.sqrt(-2.0 * math.log1p(-u1))
            angle = _TWO_PI * u2
            out[q, 2 * b] = radius * math.cos(angle)
            if 2 * b + 1 < n_modes:
                out[q, 2 * b + 1] = radius * math.sin(angle)
    return out


@njit(cache=True)
def pre_semigroup(s, i, lam, mu1, mu2, alpha, dt, dw1, dw2, use1, use2, z):
    """Fill ``z[:, 0]`` and ``z[:, 1]`` with ``S + dt F1 + S dW1`` and
    ``I + dt F2 + I dW2`` for nonnegative ``s, i`` of shape (paths, n).

    ``dw`` arrays are (paths, n) or (paths, 1) for spatially constant noise.
    """
    n_paths, n = s.shape
    w1 = dw1.shape[1] > 1
    w2 = dw2.shape[1] > 1
    for p in range(n_paths):
        for j in range(n):
            sv = s[p, j]
            iv = i[p, j]
            tot = sv + iv
            if tot > 0.0:
                inc = alpha[j] * (min(sv, iv) * (max(sv, iv) / tot))
            else:
                inc = 0.0
            zs = sv * (1.0 - dt * mu1[j]) + dt * (lam[j] - inc)
            zi = iv * (1.0 - dt * mu2[j]) + dt * inc
            if use1:
                zs += sv * dw1[p, j if w1 else 0]
            if use2:
                zi += iv * dw2[p, j if w2 else 0]
            z[p, 0, j] = zs
            z[p, 1, j] = zi


@njit(cache=True)
def clip_negative(out, z, rel_tol, clipped):
    """Clamp ``out`` at zero in place; count entries below
    ``-rel_tol * max|z|`` of their row as genuine clips."""
    n_paths, n_species, n = out.shape
    for p in range(n_paths):
        for c in range(n_species):
            zmax = 0.0
            for j in range(n):
                zmax = max(zmax, abs(z[p, c, j]))
            floor = -rel_tol * zmax
            for j in range(n):
                v = out[p, c, j]
                if v < 0.0:
                    if v < floor:
                        clipped[p] += 1
                    out[p, c, j] = 0.0
