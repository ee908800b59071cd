"""Compiled loops for the collision transforms.

Small layers are dominated by per-call numpy overhead; these kernels do the
whole transform in one pass. Results match the vectorised numpy versions in
:mod:`kinopt.kinetic` up to floating-point summation order.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _unit_rows(a):
    n, d = a.shape
    u = np.zeros((n, d))
    for i in range(n):
        s = 0.0
        for k in range(d):
            s += a[i, k] * a[i, k]
        if s > 0.0:
            r = 1.0 / math.sqrt(s)
            for k in range(d):
                u[i, k] = a[i, k] * r
    return u


@njit(cache=True)
def soft_kernel(w, g, coef, zero_diag):
    uw = _unit_rows(w)
    ug = _unit_rows(g)
    k = (uw @ uw.T) * (ug @ ug.T)
    if zero_diag:
        for i in range(k.shape[0]):
            k[i, i] = 0.0
    return g - coef * (k @ g)


@njit(cache=True)
def _distance(gram, i, j):
    d2 = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
    return math.sqrt(d2) if d2 > 0.0 else 0.0


@njit(cache=True)
def hard_pairs(w, g, coll_coef, one_per_neuron):
    """Accepted collision pairs ``(i, j)``, ``i < j``, in row-major order.

    Distances come from Gram matrices and only decide acceptance; the
    scattering itself recomputes gradient differences directly.
    """
    n = w.shape[0]
    gg = g @ g.T
    d2max = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d2 = gg[i, i] + gg[j, j] - 2.0 * gg[i, j]
            if d2 > d2max:
                d2max = d2
    if d2max == 0.0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    gmax = math.sqrt(d2max)
    wg = w @ w.T
    thresh = 1.0 - coll_coef
    cap = 64
    pi = np.empty(cap, dtype=np.int64)
    pj = np.empty(cap, dtype=np.int64)
    score = np.empty(cap)
    m = 0
    cut = (thresh * gmax) ** 2 * (1.0 - 1e-9)
    for i in range(n):
        for j in range(i + 1, n):
            # exp(-w_r) <= 1, so both filters only skip pairs that cannot pass
            if gg[i, i] + gg[j, j] - 2.0 * gg[i, j] < cut:
                continue
            gr = _distance(gg, i, j)
            if gr / gmax <= thresh:
                continue
            sc = gr * math.exp(-_distance(wg, i, j)) / gmax
            if sc > thresh:
                if m == cap:
                    cap *= 2
                    pi = np.concatenate((pi, np.empty(cap - m, dtype=np.int64)))
                    pj = np.concatenate((pj, np.empty(cap - m, dtype=np.int64)))
                    score = np.concatenate((score, np.empty(cap - m)))
                pi[m] = i
                pj[m] = j
                score[m] = sc
                m += 1
    pi = pi[:m]
    pj = pj[:m]
    if not one_per_neuron or m == 0:
        return pi, pj
    order = np.argsort(-score[:m], kind="mergesort")
    used = np.zeros(n, dtype=np.bool_)
    take = np.zeros(m, dtype=np.bool_)
    for q in order:
        a = pi[q]
        b = pj[q]
        if not used[a] and not used[b]:
            used[a] = True
            used[b] = True
            take[q] = True
    return pi[take], pj[take]


@njit(cache=True)
def hard_apply(g, pi, pj, normals):
    """Scatter each listed pair along the direction of ``normals[p]``.

    ``normals`` rows are isotropic Gaussian draws, normalised here. Returns
    ``(out, ok)``; ``ok`` is False if some row was exactly zero, in which
    case ``out`` must be discarded.
    """
    out = g.copy()
    d = g.shape[1]
    for p in range(pi.shape[0]):
        i = pi[p]
        j = pj[p]
        nn = 0.0
        gr = 0.0
        for k in range(d):
            nn += normals[p, k] * normals[p, k]
            dg = g[i, k] - g[j, k]
            gr += dg * dg
        if nn == 0.0:
            return out, False
        scale = 0.5 * math.sqrt(gr) / math.sqrt(nn)
        for k in range(d):
            cm = 0.5 * (g[i, k] + g[j, k])
            half = scale * normals[p, k]
            out[i, k] += cm + half - g[i, k]
            out[j, k] += cm - half - g[j, k]
    return out, True
