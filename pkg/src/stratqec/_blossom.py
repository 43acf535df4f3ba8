"""Maximum-weight general matching (Edmonds' blossom algorithm) for numba.

This follows the classic O(n^3) primal-dual formulation with integer
weights so that all slack comparisons are exact. Recursive steps of the
textbook presentation (leaf enumeration, blossom expansion, augmentation
through nested blossoms) are carried out with explicit stacks.
"""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _leaves(b, nvertex, childs, nchilds, out, stack):
    """Write the vertices inside blossom ``b`` into ``out``; return count."""
    n_out = 0
    if b < nvertex:
        out[0] = b
        return 1
    top = 0
    stack[top] = b
    top += 1
    while top > 0:
        top -= 1
        x = stack[top]
        for i in range(nchilds[x]):
            c = childs[x, i]
            if c < nvertex:
                out[n_out] = c
                n_out += 1
            else:
                stack[top] = c
                top += 1
    return n_out


@nb.njit(cache=True)
def max_weight_matching(nvertex, ei, ej, ew):
    """Maximum-cardinality matching of maximum total weight.

    ``ei, ej, ew`` list the edges (int64 weights). Returns ``mate`` with
    ``mate[v]`` the partner of ``v`` or -1.
    """
    nedge = ei.shape[0]
    mate = np.full(nvertex, -1, dtype=np.int64)
    if nedge == 0 or nvertex == 0:
        return mate
    n2 = 2 * nvertex
    maxweight = 0
    for k in range(nedge):
        if ew[k] > maxweight:
            maxweight = ew[k]

    endpoint = np.empty(2 * nedge, dtype=np.int64)
    deg = np.zeros(nvertex + 1, dtype=np.int64)
    for k in range(nedge):
        endpoint[2 * k] = ei[k]
        endpoint[2 * k + 1] = ej[k]
        deg[ei[k] + 1] += 1
        deg[ej[k] + 1] += 1
    nb_start = np.cumsum(deg)
    nb_fill = nb_start[:-1].copy()
    neighbend = np.empty(2 * nedge, dtype=np.int64)
    for k in range(nedge):
        neighbend[nb_fill[ei[k]]] = 2 * k + 1
        nb_fill[ei[k]] += 1
        neighbend[nb_fill[ej[k]]] = 2 * k
        nb_fill[ej[k]] += 1

    # mate holds remote endpoints during the algorithm.
    label = np.zeros(n2, dtype=np.int64)
    labelend = np.full(n2, -1, dtype=np.int64)
    inblossom = np.arange(nvertex)
    blossomparent = np.full(n2, -1, dtype=np.int64)
    childs = np.full((n2, nvertex + 1), -1, dtype=np.int64)
    endps = np.full((n2, nvertex + 1), -1, dtype=np.int64)
    nchilds = np.zeros(n2, dtype=np.int64)
    blossombase = np.full(n2, -1, dtype=np.int64)
    for v in range(nvertex):
        blossombase[v] = v
    bestedge = np.full(n2, -1, dtype=np.int64)
    bbe = np.full((n2, n2), -1, dtype=np.int64)
    nbbe = np.full(n2, -1, dtype=np.int64)  # -1 means "no list"
    unused = np.empty(nvertex, dtype=np.int64)
    n_unused = nvertex
    for i in range(nvertex):
        unused[i] = nvertex + i
    dualvar = np.zeros(n2, dtype=np.int64)
    for v in range(nvertex):
        dualvar[v] = maxweight
    allowedge = np.zeros(nedge, dtype=np.bool_)
    queue = np.empty(nvertex * nvertex + 8 * nvertex + 8, dtype=np.int64)
    qlen = 0
    leafbuf = np.empty(nvertex, dtype=np.int64)
    stackbuf = np.empty(n2, dtype=np.int64)
    pathbuf = np.empty(n2, dtype=np.int64)
    tmp = np.empty(nvertex + 1, dtype=np.int64)
    bestedgeto = np.full(n2, -1, dtype=np.int64)
    aug_b = np.empty(n2 * 4, dtype=np.int64)
    aug_v = np.empty(n2 * 4, dtype=np.int64)

    for _stage in range(nvertex):
        label[:] = 0
        bestedge[:] = -1
        for b in range(nvertex, n2):
            nbbe[b] = -1
        allowedge[:] = False
        qlen = 0
        for v in range(nvertex):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                # assignLabel(v, 1, -1)
                w, t, p = v, 1, -1
                while True:
                    b = inblossom[w]
                    label[w] = t
                    label[b] = t
                    labelend[w] = p
                    labelend[b] = p
                    bestedge[w] = -1
                    bestedge[b] = -1
                    if t == 1:
                        cnt = _leaves(b, nvertex, childs, nchilds, leafbuf, stackbuf)
                        for i in range(cnt):
                            queue[qlen] = leafbuf[i]
                            qlen += 1
                        break
                    base = blossombase[b]
                    pm = mate[base]
                    w = endpoint[pm]
                    t = 1
                    p = pm ^ 1
        augmented = False
        while True:
            while qlen > 0 and not augmented:
                qlen -= 1
                v = queue[qlen]
                for ii in range(nb_start[v], nb_start[v + 1]):
                    p = neighbend[ii]
                    k = p // 2
                    w = endpoint[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    kslack = 0
                    if not allowedge[k]:
                        kslack = dualvar[ei[k]] + dualvar[ej[k]] - 2 * ew[k]
                        if kslack <= 0:
                            allowedge[k] = True
                    if allowedge[k]:
                        if label[inblossom[w]] == 0:
                            # assignLabel(w, 2, p ^ 1)
                            ww, t, pp = w, 2, p ^ 1
                            while True:
                                b = inblossom[ww]
                                label[ww] = t
                                label[b] = t
                                labelend[ww] = pp
                                labelend[b] = pp
                                bestedge[ww] = -1
                                bestedge[b] = -1
                                if t == 1:
                                    cnt = _leaves(b, nvertex, childs, nchilds, leafbuf, stackbuf)
                                    for i in range(cnt):
                                        queue[qlen] = leafbuf[i]
                                        qlen += 1
                                    break
                                base = blossombase[b]
                                pm = mate[base]
                                ww = endpoint[pm]
                                t = 1
                                pp = pm ^ 1
                        elif label[inblossom[w]] == 1:
                            # scanBlossom(v, w)
                            npath = 0
                            base = -1
                            sv, sw = v, w
                            while sv != -1 or sw != -1:
                                b = inblossom[sv]
                                if label[b] & 4:
                                    base = blossombase[b]
                                    break
                                pathbuf[npath] = b
                                npath += 1
                                label[b] = 5
                                if labelend[b] == -1:
                                    sv = -1
                                else:
                                    sv = endpoint[labelend[b]]
                                    b = inblossom[sv]
                                    sv = endpoint[labelend[b]]
                                if sw != -1:
                                    sv, sw = sw, sv
                            for i in range(npath):
                                label[pathbuf[i]] = 1
                            if base >= 0:
                                # addBlossom(base, k)
                                av = ei[k]
                                aw = ej[k]
                                bb = inblossom[base]
                                bv = inblossom[av]
                                bw = inblossom[aw]
                                n_unused -= 1
                                nbl = unused[n_unused]
                                blossombase[nbl] = base
                                blossomparent[nbl] = -1
                                blossomparent[bb] = nbl
                                nc = 0
                                while bv != bb:
                                    blossomparent[bv] = nbl
                                    childs[nbl, nc] = bv
                                    endps[nbl, nc] = labelend[bv]
                                    nc += 1
                                    av = endpoint[labelend[bv]]
                                    bv = inblossom[av]
                                childs[nbl, nc] = bb
                                nc += 1
                                # reverse childs[0:nc] and endps[0:nc-1]
                                for i in range(nc // 2):
                                    x = childs[nbl, i]
                                    childs[nbl, i] = childs[nbl, nc - 1 - i]
                                    childs[nbl, nc - 1 - i] = x
                                ne = nc - 1
                                for i in range(ne // 2):
                                    x = endps[nbl, i]
                                    endps[nbl, i] = endps[nbl, ne - 1 - i]
                                    endps[nbl, ne - 1 - i] = x
                                endps[nbl, ne] = 2 * k
                                ne += 1
                                while bw != bb:
                                    blossomparent[bw] = nbl
                                    childs[nbl, nc] = bw
                                    nc += 1
                                    endps[nbl, ne] = labelend[bw] ^ 1
                                    ne += 1
                                    aw = endpoint[labelend[bw]]
                                    bw = inblossom[aw]
                                nchilds[nbl] = nc
                                label[nbl] = 1
                                labelend[nbl] = labelend[bb]
                                dualvar[nbl] = 0
                                cnt = _leaves(nbl, nvertex, childs, nchilds, leafbuf, stackbuf)
                                for i in range(cnt):
                                    lv = leafbuf[i]
                                    if label[inblossom[lv]] == 2:
                                        queue[qlen] = lv
                                        qlen += 1
                                    inblossom[lv] = nbl
                                bestedgeto[:] = -1
                                for ci in range(nc):
                                    cbv = childs[nbl, ci]
                                    if nbbe[cbv] == -1:
                                        cnt = _leaves(cbv, nvertex, childs, nchilds, leafbuf, stackbuf)
                                        for li in range(cnt):
                                            lv = leafbuf[li]
                                            for jj in range(nb_start[lv], nb_start[lv + 1]):
                                                kk = neighbend[jj] // 2
                                                i2 = ei[kk]
                                                j2 = ej[kk]
                                                if inblossom[j2] == nbl:
                                                    i2, j2 = j2, i2
                                                bj = inblossom[j2]
                                                if bj != nbl and label[bj] == 1:
                                                    if bestedgeto[bj] == -1:
                                                        bestedgeto[bj] = kk
                                                    else:
                                                        k0 = bestedgeto[bj]
                                                        s_new = dualvar[ei[kk]] + dualvar[ej[kk]] - 2 * ew[kk]
                                                        s_old = dualvar[ei[k0]] + dualvar[ej[k0]] - 2 * ew[k0]
                                                        if s_new < s_old:
                                                            bestedgeto[bj] = kk
                                    else:
                                        for li in range(nbbe[cbv]):
                                            kk = bbe[cbv, li]
                                            i2 = ei[kk]
                                            j2 = ej[kk]
                                            if inblossom[j2] == nbl:
                                                i2, j2 = j2, i2
                                            bj = inblossom[j2]
                                            if bj != nbl and label[bj] == 1:
                                                if bestedgeto[bj] == -1:
                                                    bestedgeto[bj] = kk
                                                else:
                                                    k0 = bestedgeto[bj]
                                                    s_new = dualvar[ei[kk]] + dualvar[ej[kk]] - 2 * ew[kk]
                                                    s_old = dualvar[ei[k0]] + dualvar[ej[k0]] - 2 * ew[k0]
                                                    if s_new < s_old:
                                                        bestedgeto[bj] = kk
                                    nbbe[cbv] = -1
                                    bestedge[cbv] = -1
                                cntb = 0
                                for x in range(n2):
                                    if bestedgeto[x] != -1:
                                        bbe[nbl, cntb] = bestedgeto[x]
                                        cntb += 1
                                nbbe[nbl] = cntb
                                bestedge[nbl] = -1
                                for li in range(cntb):
                                    kk = bbe[nbl, li]
                                    if bestedge[nbl] == -1:
                                        bestedge[nbl] = kk
                                    else:
                                        k0 = bestedge[nbl]
                                        if (dualvar[ei[kk]] + dualvar[ej[kk]] - 2 * ew[kk]
                                                < dualvar[ei[k0]] + dualvar[ej[k0]] - 2 * ew[k0]):
                                            bestedge[nbl] = kk
                            else:
                                # augmentMatching(k)
                                for side in range(2):
                                    if side == 0:
                                        s = ei[k]
                                        p2 = 2 * k + 1
                                    else:
                                        s = ej[k]
                                        p2 = 2 * k
                                    while True:
                                        bs = inblossom[s]
                                        if bs >= nvertex:
                                            _augment_blossom(bs, s, nvertex, blossomparent, childs,
                                                             endps, nchilds, blossombase, endpoint,
                                                             mate, aug_b, aug_v, tmp)
                                        mate[s] = p2
                                        if labelend[bs] == -1:
                                            break
                                        t2 = endpoint[labelend[bs]]
                                        bt = inblossom[t2]
                                        s = endpoint[labelend[bt]]
                                        j3 = endpoint[labelend[bt] ^ 1]
                                        if bt >= nvertex:
                                            _augment_blossom(bt, j3, nvertex, blossomparent, childs,
                                                             endps, nchilds, blossombase, endpoint,
                                                             mate, aug_b, aug_v, tmp)
                                        mate[j3] = labelend[bt]
                                        p2 = labelend[bt] ^ 1
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1:
                            bestedge[b] = k
                        else:
                            k0 = bestedge[b]
                            if kslack < dualvar[ei[k0]] + dualvar[ej[k0]] - 2 * ew[k0]:
                                bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1:
                            bestedge[w] = k
                        else:
                            k0 = bestedge[w]
                            if kslack < dualvar[ei[k0]] + dualvar[ej[k0]] - 2 * ew[k0]:
                                bestedge[w] = k
            if augmented:
                break

            deltatype = -1
            delta = 0
            deltaedge = -1
            deltablossom = -1
            for v in range(nvertex):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    k0 = bestedge[v]
                    dd = dualvar[ei[k0]] + dualvar[ej[k0]] - 2 * ew[k0]
                    if deltatype == -1 or dd < delta:
                        delta = dd
                        deltatype = 2
                        deltaedge = k0
            for b in range(n2):
                if blossomparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    k0 = bestedge[b]
                    dd = (dualvar[ei[k0]] + dualvar[ej[k0]] - 2 * ew[k0]) // 2
                    if deltatype == -1 or dd < delta:
                        delta = dd
                        deltatype = 3
                        deltaedge = k0
            for b in range(nvertex, n2):
                if (blossombase[b] >= 0 and blossomparent[b] == -1 and label[b] == 2
                        and (deltatype == -1 or dualvar[b] < delta)):
                    delta = dualvar[b]
                    deltatype = 4
                    deltablossom = b
            if deltatype == -1:
                deltatype = 1
                mn = dualvar[0]
                for v in range(1, nvertex):
                    if dualvar[v] < mn:
                        mn = dualvar[v]
                delta = mn if mn > 0 else 0
            for v in range(nvertex):
                lb = label[inblossom[v]]
                if lb == 1:
                    dualvar[v] -= delta
                elif lb == 2:
                    dualvar[v] += delta
            for b in range(nvertex, n2):
                if blossombase[b] >= 0 and blossomparent[b] == -1:
                    if label[b] == 1:
                        dualvar[b] += delta
                    elif label[b] == 2:
                        dualvar[b] -= delta
            if deltatype == 1:
                break
            elif deltatype == 2:
                allowedge[deltaedge] = True
                i2 = ei[deltaedge]
                if label[inblossom[i2]] == 0:
                    i2 = ej[deltaedge]
                queue[qlen] = i2
                qlen += 1
            elif deltatype == 3:
                allowedge[deltaedge] = True
                queue[qlen] = ei[deltaedge]
                qlen += 1
            else:
                n_unused, qlen = _expand_blossom(
                    deltablossom, False, nvertex, blossomparent, childs, endps, nchilds,
                    blossombase, inblossom, dualvar, label, labelend, bestedge, nbbe, unused,
                    n_unused, endpoint, mate, allowedge, queue, qlen, leafbuf, stackbuf)
        if not augmented:
            break
        for b in range(nvertex, n2):
            if (blossomparent[b] == -1 and blossombase[b] >= 0 and label[b] == 1
                    and dualvar[b] == 0):
                n_unused, qlen = _expand_blossom(
                    b, True, nvertex, blossomparent, childs, endps, nchilds,
                    blossombase, inblossom, dualvar, label, labelend, bestedge, nbbe, unused,
                    n_unused, endpoint, mate, allowedge, queue, qlen, leafbuf, stackbuf)

    for v in range(nvertex):
        if mate[v] >= 0:
            mate[v] = endpoint[mate[v]]
    return mate


@nb.njit(cache=True)
def _assign_label(w, t, p, inblossom, label, labelend, bestedge, blossombase, mate, endpoint,
                  nvertex, childs, nchilds, queue, qlen, leafbuf, stackbuf):
    while True:
        b = inblossom[w]
        label[w] = t
        label[b] = t
        labelend[w] = p
        labelend[b] = p
        bestedge[w] = -1
        bestedge[b] = -1
        if t == 1:
            cnt = _leaves(b, nvertex, childs, nchilds, leafbuf, stackbuf)
            for i in range(cnt):
                queue[qlen] = leafbuf[i]
                qlen += 1
            return qlen
        base = blossombase[b]
        pm = mate[base]
        w = endpoint[pm]
        t = 1
        p = pm ^ 1


@nb.njit(cache=True)
def _expand_blossom(b0, endstage, nvertex, blossomparent, childs, endps, nchilds, blossombase,
                    inblossom, dualvar, label, labelend, bestedge, nbbe, unused, n_unused,
                    endpoint, mate, allowedge, queue, qlen, leafbuf, stackbuf):
    todo = np.empty(2 * nvertex, dtype=np.int64)
    ntodo = 1
    todo[0] = b0
    while ntodo > 0:
        ntodo -= 1
        b = todo[ntodo]
        L = nchilds[b]
        for ci in range(L):
            s = childs[b, ci]
            blossomparent[s] = -1
            if s < nvertex:
                inblossom[s] = s
            elif endstage and dualvar[s] == 0:
                todo[ntodo] = s
                ntodo += 1
            else:
                cnt = _leaves(s, nvertex, childs, nchilds, leafbuf, stackbuf)
                for i in range(cnt):
                    inblossom[leafbuf[i]] = s
        if (not endstage) and label[b] == 2:
            entrychild = inblossom[endpoint[labelend[b] ^ 1]]
            j = 0
            for ci in range(L):
                if childs[b, ci] == entrychild:
                    j = ci
                    break
            if j & 1:
                j -= L
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            p = labelend[b]
            while j != 0:
                label[endpoint[p ^ 1]] = 0
                e = endps[b, (j - endptrick) % L]
                label[endpoint[e ^ endptrick ^ 1]] = 0
                qlen = _assign_label(endpoint[p ^ 1], 2, p, inblossom, label, labelend, bestedge,
                                     blossombase, mate, endpoint, nvertex, childs, nchilds,
                                     queue, qlen, leafbuf, stackbuf)
                allowedge[e // 2] = True
                j += jstep
                p = endps[b, (j - endptrick) % L] ^ endptrick
                allowedge[p // 2] = True
                j += jstep
            bv = childs[b, j % L]
            label[endpoint[p ^ 1]] = 2
            label[bv] = 2
            labelend[endpoint[p ^ 1]] = p
            labelend[bv] = p
            bestedge[bv] = -1
            j += jstep
            while childs[b, j % L] != entrychild:
                bv = childs[b, j % L]
                if label[bv] == 1:
                    j += jstep
                    continue
                cnt = _leaves(bv, nvertex, childs, nchilds, leafbuf, stackbuf)
                found = -1
                for i in range(cnt):
                    if label[leafbuf[i]] != 0:
                        found = leafbuf[i]
                        break
                if found >= 0:
                    v = found
                    label[v] = 0
                    label[endpoint[mate[blossombase[bv]]]] = 0
                    qlen = _assign_label(v, 2, labelend[v], inblossom, label, labelend, bestedge,
                                         blossombase, mate, endpoint, nvertex, childs, nchilds,
                                         queue, qlen, leafbuf, stackbuf)
                j += jstep
        label[b] = -1
        labelend[b] = -1
        nchilds[b] = 0
        blossombase[b] = -1
        nbbe[b] = -1
        bestedge[b] = -1
        unused[n_unused] = b
        n_unused += 1
    return n_unused, qlen


@nb.njit(cache=True)
def _augment_blossom(b0, v0, nvertex, blossomparent, childs, endps, nchilds, blossombase,
                     endpoint, mate, stack_b, stack_v, tmp):
    """Swap matched/unmatched edges inside blossom ``b0`` so ``v0`` becomes its base.

    Each nested blossom is an independent subproblem touching only its own
    interior, so pending sub-blossoms are kept on a stack.
    """
    top = 1
    stack_b[0] = b0
    stack_v[0] = v0
    while top > 0:
        top -= 1
        b = stack_b[top]
        v = stack_v[top]
        t = v
        while blossomparent[t] != b:
            t = blossomparent[t]
        if t >= nvertex:
            stack_b[top] = t
            stack_v[top] = v
            top += 1
        L = nchilds[b]
        i = 0
        for ci in range(L):
            if childs[b, ci] == t:
                i = ci
                break
        j = i
        if i & 1:
            j -= L
            jstep = 1
            endptrick = 0
        else:
            jstep = -1
            endptrick = 1
        while j != 0:
            j += jstep
            t = childs[b, j % L]
            p = endps[b, (j - endptrick) % L] ^ endptrick
            if t >= nvertex:
                stack_b[top] = t
                stack_v[top] = endpoint[p]
                top += 1
            j += jstep
            t = childs[b, j % L]
            if t >= nvertex:
                stack_b[top] = t
                stack_v[top] = endpoint[p ^ 1]
                top += 1
            mate[endpoint[p]] = p ^ 1
            mate[endpoint[p ^ 1]] = p
        for ci in range(L):
            tmp[ci] = childs[b, (ci + i) % L]
        for ci in range(L):
            childs[b, ci] = tmp[ci]
        for ci in range(L):
            tmp[ci] = endps[b, (ci + i) % L]
        for ci in range(L):
            endps[b, ci] = tmp[ci]
        blossombase[b] = v
