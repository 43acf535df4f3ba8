"""Numba hot loops shared by the sampler and the matching decoder."""

from __future__ import annotations

import numba as nb
import numpy as np

from ._blossom import max_weight_matching

_INF = np.inf


@nb.njit(cache=True, parallel=True)
def xor_rows(rows, idx, out):
    """out[s] = XOR of rows[idx[s, j]] over j; negative indices are skipped."""
    n, w = idx.shape
    nwords = rows.shape[1]
    for s in nb.prange(n):
        for k in range(nwords):
            out[s, k] = 0
        for j in range(w):
            r = idx[s, j]
            if r < 0:
                continue
            for k in range(nwords):
                out[s, k] ^= rows[r, k]


@nb.njit(cache=True)
def draw_fault_rows(u, paulis, weights, num_locations, out):
    """Fill ``out`` with QEPG row indices for fixed-weight fault sets.

    Shot ``s`` takes ``weights[s]`` distinct locations by partial
    Fisher-Yates over ``range(num_locations)`` driven by the uniforms
    ``u[s]``; its Pauli draws are ``paulis[s]`` (0=X, 1=Y, 2=Z). Unused
    columns are set to -1.
    """
    n, width = out.shape
    perm = np.arange(num_locations)
    swaps = np.empty(width, dtype=np.int64)
    for s in range(n):
        w = weights[s]
        for j in range(w):
            k = j + int(u[s, j] * (num_locations - j))
            if k >= num_locations:
                k = num_locations - 1
            swaps[j] = k
            tmp = perm[j]
            perm[j] = perm[k]
            perm[k] = tmp
            out[s, j] = 3 * perm[j] + paulis[s, j]
        for j in range(w, width):
            out[s, j] = -1
        for j in range(w - 1, -1, -1):
            k = swaps[j]
            tmp = perm[j]
            perm[j] = perm[k]
            perm[k] = tmp


@nb.njit(cache=True)
def _match_exact(dist, bnd, k, partner):
    """Minimum-weight pairing of k defects (each may also take the boundary).

    Bitmask DP; ``partner[i]`` receives the matched defect or -1 for the
    boundary. Ties resolve towards the lowest defect index.
    """
    full = (1 << k) - 1
    dp = np.full(full + 1, _INF)
    choice = np.full(full + 1, -2, dtype=np.int64)
    dp[0] = 0.0
    for mask in range(1, full + 1):
        i = 0
        while not (mask >> i) & 1:
            i += 1
        rest = mask ^ (1 << i)
        best = bnd[i] + dp[rest]
        arg = -1
        j = i + 1
        while j < k:
            if (rest >> j) & 1:
                c = dist[i, j] + dp[rest ^ (1 << j)]
                if c < best:
                    best = c
                    arg = j
            j += 1
        dp[mask] = best
        choice[mask] = arg
    mask = full
    while mask:
        i = 0
        while not (mask >> i) & 1:
            i += 1
        j = choice[mask]
        partner[i] = j
        mask ^= 1 << i
        if j >= 0:
            partner[j] = i
            mask ^= 1 << j
    return dp[full]


_COST_SCALE = 1 << 20


@nb.njit(cache=True)
def _match_blossom(dist, bnd, k, partner):
    """Exact minimum-weight pairing via the blossom algorithm.

    Each defect gets a boundary twin; twins pair with each other at no
    cost, so any subset of defects can use the boundary. Costs are scaled
    to integers, which keeps the dual updates exact.
    """
    big = 1
    for a in range(k):
        if np.isfinite(bnd[a]):
            c = int(round(bnd[a] * _COST_SCALE))
            if c + 1 > big:
                big = c + 1
        for b in range(a + 1, k):
            if np.isfinite(dist[a, b]):
                c = int(round(dist[a, b] * _COST_SCALE))
                if c + 1 > big:
                    big = c + 1
    nmax = k * (k - 1) + k
    ei = np.empty(nmax, dtype=np.int64)
    ej = np.empty(nmax, dtype=np.int64)
    ew = np.empty(nmax, dtype=np.int64)
    m = 0
    for a in range(k):
        for b in range(a + 1, k):
            if np.isfinite(dist[a, b]) and dist[a, b] < bnd[a] + bnd[b]:
                ei[m] = a
                ej[m] = b
                ew[m] = big - int(round(dist[a, b] * _COST_SCALE))
                m += 1
        if np.isfinite(bnd[a]):
            ei[m] = a
            ej[m] = k + a
            ew[m] = big - int(round(bnd[a] * _COST_SCALE))
            m += 1
        for b in range(a + 1, k):
            ei[m] = k + a
            ej[m] = k + b
            ew[m] = big
            m += 1
    mate = max_weight_matching(2 * k, ei[:m], ej[:m], ew[:m])
    total = 0.0
    for a in range(k):
        j = mate[a]
        if 0 <= j < k:
            partner[a] = j
            if j > a:
                total += dist[a, j]
        else:
            partner[a] = -1
            total += bnd[a]
    return total


@nb.njit(cache=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@nb.njit(cache=True)
def match_defects(defects, dist, bnd_dist, pair_mask, bnd_mask, max_dp, out_stats):
    """Match one syndrome's defects; returns the XOR of observable masks.

    Two defects are only worth pairing when their distance is below the
    sum of their boundary distances; otherwise sending both to the
    boundary is no worse. Clusters linked by such pairs are therefore
    independent and each one is matched on its own: by bitmask dynamic
    programming when it has at most ``max_dp`` defects, otherwise by the
    blossom algorithm. Both are exact.

    ``out_stats[0]`` counts blossom calls, ``out_stats[1]`` receives the
    total matching weight.
    """
    k = defects.shape[0]
    out_stats[1] = 0.0
    if k == 0:
        return np.uint64(0)
    parent = np.arange(k)
    for a in range(k):
        da = defects[a]
        for b in range(a + 1, k):
            db = defects[b]
            if dist[da, db] < bnd_dist[da] + bnd_dist[db]:
                ra = _find(parent, a)
                rb = _find(parent, b)
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb
    roots = np.empty(k, dtype=np.int64)
    for a in range(k):
        roots[a] = _find(parent, a)
    acc = np.uint64(0)
    members = np.empty(k, dtype=np.int64)
    for r in range(k):
        if roots[r] != r:
            continue
        m = 0
        for a in range(k):
            if roots[a] == r:
                members[m] = defects[a]
                m += 1
        if m == 1:
            acc ^= bnd_mask[members[0]]
            out_stats[1] += bnd_dist[members[0]]
            continue
        sub = np.empty((m, m))
        bnd = np.empty(m)
        for a in range(m):
            bnd[a] = bnd_dist[members[a]]
            for b in range(m):
                sub[a, b] = dist[members[a], members[b]]
        partner = np.full(m, -1, dtype=np.int64)
        if m <= max_dp:
            total = _match_exact(sub, bnd, m, partner)
        else:
            total = _match_blossom(sub, bnd, m, partner)
            out_stats[0] += 1
        out_stats[1] += total
        for a in range(m):
            b = partner[a]
            if b < 0:
                acc ^= bnd_mask[members[a]]
            elif b > a:
                acc ^= pair_mask[members[a], members[b]]
    return acc


@nb.njit(cache=True)
def decode_batch(syndromes, dist, bnd_dist, pair_mask, bnd_mask, max_dp, out):
    """Decode each row of ``syndromes`` (uint8, one byte per graph node).

    Returns the number of blossom calls made.
    """
    n, m = syndromes.shape
    stats = np.zeros(2)
    buf = np.empty(m, dtype=np.int64)
    for s in range(n):
        k = 0
        for r in range(m):
            if syndromes[s, r]:
                buf[k] = r
                k += 1
        out[s] = match_defects(buf[:k], dist, bnd_dist, pair_mask, bnd_mask, max_dp, stats)
    return int(stats[0])


@nb.njit(cache=True)
def path_masks(dist, pred, edge_mask):
    """Observable mask accumulated along each shortest path.

    ``pred[s, v]`` is the predecessor of ``v`` on the shortest path from
    ``s`` (negative for none); ``edge_mask[u, v]`` is the mask of the edge
    used between adjacent nodes. Nodes are settled in order of distance so
    each predecessor's mask is ready before it is needed.
    """
    n = dist.shape[0]
    out = np.zeros((n, n), dtype=np.uint64)
    for s in range(n):
        order = np.argsort(dist[s])
        for v in order:
            if v == s or not np.isfinite(dist[s, v]):
                continue
            u = pred[s, v]
            if u < 0:
                continue
            out[s, v] = out[s, u] ^ edge_mask[u, v]
    return out
