"""Compiled inner loops.

Greedy packings and tournament minimization are sequential by nature (each
decision depends on the previous ones), so they are written as plain loops and
compiled with numba.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

PSI_MAJORITY = 0
PSI_TRIMMED = 1
# Pairs within a relative TIE_TOL of the packing separation count as conflicts.
# Lattice distances hit the separation exactly, and without the tolerance float
# rounding would decide those ties differently at different scales.
TIE_TOL = 1e-9


@njit(cache=True)
def _greedy_strip(points, sep):
    # Admitted points are scanned in a strip along the first coordinate.
    m, n = points.shape
    rep = np.empty(m, np.int64)
    adm = np.empty(m, np.int64)
    na = 0
    start = 0
    sep = sep * (1.0 + TIE_TOL)
    sep2 = sep * sep
    for i in range(m):
        x0 = points[i, 0]
        while start < na and points[adm[start], 0] < x0 - sep - 1e-9:
            start += 1
        found = -1
        for t in range(start, na):
            j = adm[t]
            d2 = 0.0
            for k in range(n):
                diff = points[i, k] - points[j, k]
                d2 += diff * diff
            if d2 <= sep2:
                found = j
                break
        if found < 0:
            rep[i] = i
            adm[na] = i
            na += 1
        else:
            rep[i] = found
    return rep


@njit(cache=True)
def _greedy_cells(points, sep, earliest):
    # Admitted points are bucketed in cubic cells of side ``sep``; a point can
    # only conflict with admitted points in the 3^n neighbouring cells, and a
    # cell holds at most 2^n admitted points. Without ``earliest`` the search
    # stops at the first conflict (own cell first), which is enough to decide
    # admission but leaves ``rep`` pointing at some admitted neighbour.
    m, n = points.shape
    sep = sep * (1.0 + TIE_TOL)
    # Cells are a hair wider than ``sep`` so two points exactly ``sep`` apart
    # never round into cells two apart.
    side = sep * (1.0 + 1e-9)
    lo = np.empty(n)
    dims = np.empty(n, np.int64)
    for k in range(n):
        lo[k] = points[:, k].min()
        dims[k] = int((points[:, k].max() - lo[k]) / side) + 1
    cap = (1 << n) + 1
    ncell = 1
    for k in range(n):
        ncell *= dims[k]
    slots = np.full((ncell, cap), -1, np.int64)
    fill = np.zeros(ncell, np.int64)
    rep = np.empty(m, np.int64)
    sep2 = sep * sep
    cell = np.empty(n, np.int64)
    nb = np.empty(n, np.int64)
    noff = 1
    for k in range(n):
        noff *= 3
    last = -1
    for i in range(m):
        if not earliest and last >= 0:
            # Consecutive lattice points usually fall to the same admitted point.
            d2 = 0.0
            for k in range(n):
                diff = points[i, k] - points[last, k]
                d2 += diff * diff
            if d2 <= sep2:
                rep[i] = last
                continue
        for k in range(n):
            cell[k] = int((points[i, k] - lo[k]) / side)
            if cell[k] >= dims[k]:
                cell[k] = dims[k] - 1
        found = -1
        for o0 in range(noff):
            if found >= 0 and not earliest:
                break
            code = (o0 + noff // 2) % noff
            inside = True
            lin = 0
            for k in range(n):
                nb[k] = cell[k] + (code % 3) - 1
                code //= 3
                if nb[k] < 0 or nb[k] >= dims[k]:
                    inside = False
                    break
                lin = lin * dims[k] + nb[k]
            if not inside:
                continue
            for t in range(fill[lin]):
                j = slots[lin, t]
                if found >= 0 and j >= found:
                    continue
                d2 = 0.0
                for k in range(n):
                    diff = points[i, k] - points[j, k]
                    d2 += diff * diff
                if d2 <= sep2:
                    found = j
        if found < 0:
            rep[i] = i
            lin = 0
            for k in range(n):
                lin = lin * dims[k] + cell[k]
            if fill[lin] >= cap:
                raise ValueError("packing cell overflow")
            slots[lin, fill[lin]] = i
            fill[lin] += 1
        else:
            rep[i] = found
            last = found
    return rep


@njit(cache=True)
def greedy_assign(points, sep, earliest=True):
    """Greedy packing over ``points`` taken in the given (lexicographic) order.

    A point is admitted iff its distance to every admitted point exceeds
    ``sep``. Returns ``rep`` where ``rep[i] == i`` for admitted points and
    otherwise the earliest admitted point within ``sep`` of point ``i``.
    """
    m, n = points.shape
    if m == 0 or sep <= 0.0 or n > 3:
        return _greedy_strip(points, sep)
    ncell = 1.0
    for k in range(n):
        ncell *= (points[:, k].max() - points[:, k].min()) / sep + 1.0
    if ncell > 2e7:
        return _greedy_strip(points, sep)
    return _greedy_cells(points, sep, earliest)


@njit(cache=True)
def lattice_ball(anchor, spacing, kmin, kmax, nu, radius):
    """Lattice points ``anchor + spacing * k`` with kmin <= k <= kmax inside ``B(nu, radius)``.

    Points come out in lexicographic order (last coordinate fastest).
    """
    n = anchor.shape[0]
    total = 1
    for k in range(n):
        total *= kmax[k] - kmin[k] + 1
    slack = radius * (1.0 + 1e-12) + 1e-12
    r2 = slack * slack
    out = np.empty((total, n))
    idx = kmin.copy()
    cnt = 0
    x = np.empty(n)
    for _ in range(total):
        d2 = 0.0
        for k in range(n):
            x[k] = anchor[k] + spacing * idx[k]
            diff = x[k] - nu[k]
            d2 += diff * diff
        if d2 <= r2:
            for k in range(n):
                out[cnt, k] = x[k]
            cnt += 1
        k = n - 1
        while k >= 0:
            idx[k] += 1
            if idx[k] <= kmax[k]:
                break
            idx[k] = kmin[k]
            k -= 1
    return out[:cnt]


@njit(cache=True)
def covered_within(points, centers, radius, any_only=False):
    """For each point, the distance to its nearest center if that is <= radius, else inf.

    With ``any_only`` the search stops at the first center within ``radius``,
    so finite outputs are only some covering distance, not the nearest one.
    """
    m, n = points.shape
    out = np.full(m, np.inf)
    c = centers.shape[0]
    if c == 0:
        return out
    lo = np.empty(n)
    ext = np.empty(n)
    for k in range(n):
        lo[k] = min(points[:, k].min(), centers[:, k].min())
        ext[k] = max(points[:, k].max(), centers[:, k].max()) - lo[k]
    # Cells of side >= radius keep every neighbour within the 3^n block.
    side = radius * (1.0 + 1e-9)
    while True:
        ncell = 1.0
        for k in range(n):
            ncell *= ext[k] / side + 1.0
        if ncell <= 4e6:
            break
        side *= 2.0
    dims = np.empty(n, np.int64)
    for k in range(n):
        dims[k] = int(ext[k] / side) + 1
    total = 1
    for k in range(n):
        total *= dims[k]
    lin = np.empty(c, np.int64)
    head = np.zeros(total + 1, np.int64)
    for j in range(c):
        v = 0
        for k in range(n):
            v = v * dims[k] + min(int((centers[j, k] - lo[k]) / side), dims[k] - 1)
        lin[j] = v
        head[v + 1] += 1
    for t in range(total):
        head[t + 1] += head[t]
    slot = head[:-1].copy()
    members = np.empty(c, np.int64)
    for j in range(c):
        members[slot[lin[j]]] = j
        slot[lin[j]] += 1
    noff = 1
    for k in range(n):
        noff *= 3
    r2 = radius * radius
    cell = np.empty(n, np.int64)
    for i in range(m):
        for k in range(n):
            cell[k] = min(int((points[i, k] - lo[k]) / side), dims[k] - 1)
        best = np.inf
        for o in range(noff):
            code = (o + noff // 2) % noff
            v = 0
            inside = True
            for k in range(n):
                nbk = cell[k] + (code % 3) - 1
                code //= 3
                if nbk < 0 or nbk >= dims[k]:
                    inside = False
                    break
                v = v * dims[k] + nbk
            if not inside:
                continue
            for t in range(head[v], head[v + 1]):
                j = members[t]
                d2 = 0.0
                for k in range(n):
                    diff = points[i, k] - centers[j, k]
                    d2 += diff * diff
                if d2 < best:
                    best = d2
                    if any_only and best <= r2:
                        break
            if any_only and best <= r2:
                break
        if best <= r2:
            out[i] = np.sqrt(best)
    return out


@njit(cache=True)
def _ceil_index(x):
    # Round away float noise before taking the ceiling (e.g. 0.25 * 4).
    return int(math.ceil(round(x, 9)))


@njit(cache=True)
def trimmed_mean_kernel(values, eps_tilde):
    """Mean of the first half clamped to type-1 quantiles of the second half."""
    total = values.shape[0]
    half = total // 2
    tail = np.sort(values[half:2 * half])
    k1 = _ceil_index(eps_tilde * half)
    k2 = _ceil_index((1.0 - eps_tilde) * half)
    if k1 < 1:
        k1 = 1
    if k2 < 1:
        k2 = 1
    if k1 > half:
        k1 = half
    if k2 > half:
        k2 = half
    q1 = tail[k1 - 1]
    q2 = tail[k2 - 1]
    acc = 0.0
    for i in range(half):
        v = values[i]
        if v < q1:
            v = q1
        elif v > q2:
            v = q2
        acc += v
    return acc / half


@njit(cache=True)
def point_sq_dists(points, X):
    """``out[j, r] = sum_k (X[r, k] - points[j, k])^2``, summed in coordinate order."""
    m, n = points.shape
    N = X.shape[0]
    out = np.empty((m, N))
    for j in range(m):
        for r in range(N):
            acc = 0.0
            for k in range(n):
                diff = X[r, k] - points[j, k]
                acc += diff * diff
            out[j, r] = acc
    return out


@njit(cache=True)
def distance_matrix(points):
    """Symmetric Euclidean distance matrix, squares summed in coordinate order."""
    m, n = points.shape
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            acc = 0.0
            for k in range(n):
                diff = points[i, k] - points[j, k]
                acc += diff * diff
            out[i, j] = out[j, i] = math.sqrt(acc)
    return out


@njit(cache=True)
def _psi(D, dist, i1, i2, mode, eps_tilde):
    """The pairwise test on columns ``i1`` (lex smaller) and ``i2`` of ``D``.

    ``D[j, r]`` is the squared distance from point ``j`` to observation ``r``
    (points along the first axis so each comparison reads contiguous rows).
    Majority mode returns 1 iff at least half the rows are weakly closer to
    ``i2``. Trimmed mode returns 1 iff the trimmed mean of
    ``V_r = (D[i1, r] - D[i2, r]) / |p_i1 - p_i2|`` is positive.
    """
    rows = D.shape[1]
    d1 = D[i1]
    d2 = D[i2]
    if mode == PSI_MAJORITY:
        cnt = 0
        for r in range(rows):
            if d1[r] >= d2[r]:
                cnt += 1
        return 1 if 2 * cnt >= rows else 0
    gap = dist[i1, i2]
    v = np.empty(rows)
    for r in range(rows):
        v[r] = (d1[r] - d2[r]) / gap
    tm = trimmed_mean_kernel(v, eps_tilde)
    return 1 if tm > 0.0 else 0


@njit(cache=True)
def _beats(D, dist, lexrank, cache, b, a, mode, eps_tilde):
    """True iff point ``b`` dominates point ``a``."""
    if lexrank[a] < lexrank[b]:
        i1, i2 = a, b
    else:
        i1, i2 = b, a
    val = cache[i1, i2]
    if val < 0:
        val = _psi(D, dist, i1, i2, mode, eps_tilde)
        cache[i1, i2] = val
    # psi = 0 means the lex-smaller point wins.
    if b == i1:
        return val == 0
    return val == 1


@njit(cache=True)
def argmin_tournament(D, dist, lexrank, order, cdelta, mode, eps_tilde):
    """Index minimizing the tournament statistic, ties to the lex-smallest point.

    ``order`` only affects speed: candidates that cannot beat the current best
    are abandoned as soon as one far dominating contender proves it. Returns
    ``(best_index, best_T)``.
    """
    m = dist.shape[0]
    cache = np.full((m, m), -1, np.int8)
    best = -1
    best_t = np.inf
    for oa in range(m):
        a = order[oa]
        t = 0.0
        pruned = False
        for ob in range(m):
            b = order[ob]
            if b == a:
                continue
            dab = dist[a, b]
            if dab < cdelta or dab <= t:
                continue
            if _beats(D, dist, lexrank, cache, b, a, mode, eps_tilde):
                t = dab
                if best >= 0 and (t > best_t or (t == best_t and lexrank[a] > lexrank[best])):
                    pruned = True
                    break
        if pruned:
            continue
        if best < 0 or t < best_t or (t == best_t and lexrank[a] < lexrank[best]):
            best = a
            best_t = t
    return best, best_t


@njit(cache=True)
def outside_counts(X, grid, radius):
    """For every grid point, the number of observations farther than ``radius``."""
    g, n = grid.shape
    N = X.shape[0]
    out = np.zeros(g, np.int64)
    r2 = radius * radius
    for j in range(g):
        cnt = 0
        for i in range(N):
            d2 = 0.0
            for k in range(n):
                diff = X[i, k] - grid[j, k]
                d2 += diff * diff
            if d2 > r2:
                cnt += 1
        out[j] = cnt
    return out


@njit(cache=True)
def _ball_members(grid, dims, kbase, anchor, spacing, gpts, u, radius, buf):
    # Global indices of indexed lattice members inside B(u, radius), in lex order.
    n = dims.shape[0]
    klo = np.empty(n, np.int64)
    khi = np.empty(n, np.int64)
    for k in range(n):
        a = int(math.ceil((u[k] - radius - anchor[k]) / spacing - 1e-9)) - kbase[k]
        b = int(math.floor((u[k] + radius - anchor[k]) / spacing + 1e-9)) - kbase[k]
        klo[k] = max(a, 0)
        khi[k] = min(b, dims[k] - 1)
        if khi[k] < klo[k]:
            return 0
    slack = radius * (1.0 + 1e-12) + 1e-12
    r2 = slack * slack
    idx = klo.copy()
    cnt = 0
    while True:
        lin = 0
        for k in range(n):
            lin = lin * dims[k] + idx[k]
        g = grid[lin]
        if g >= 0:
            d2 = 0.0
            for k in range(n):
                diff = gpts[g, k] - u[k]
                d2 += diff * diff
            if d2 <= r2:
                buf[cnt] = g
                cnt += 1
        k = n - 1
        while k >= 0:
            idx[k] += 1
            if idx[k] <= khi[k]:
                break
            idx[k] = klo[k]
            k -= 1
        if k < 0:
            break
    return cnt


@njit(cache=True)
def packed_offspring(grid, dims, kbase, anchor, spacing, gpts, parents, radius, sep):
    """Greedy ``sep``-packings of ``B(u, radius)`` over indexed lattice members, per parent.

    Returns ``(child, owner)`` as int32 arrays: global member indices (``-1``
    marks a parent whose ball holds no member, standing for the parent
    itself) and the parent row each child belongs to.
    """
    buf = np.empty(gpts.shape[0], np.int64)
    cap = 1024
    child = np.empty(cap, np.int32)
    owner = np.empty(cap, np.int32)
    total = 0
    kept = np.empty(gpts.shape[0], np.int64)
    for p in range(parents.shape[0]):
        cnt = _ball_members(grid, dims, kbase, anchor, spacing, gpts, parents[p], radius, buf)
        nk = 0
        if cnt == 0:
            kept[0] = -1
            nk = 1
        else:
            rep = greedy_assign(gpts[buf[:cnt]], sep, False)
            for i in range(cnt):
                if rep[i] == i:
                    kept[nk] = buf[i]
                    nk += 1
        if total + nk > cap:
            while total + nk > cap:
                cap *= 2
            c2 = np.empty(cap, np.int32)
            o2 = np.empty(cap, np.int32)
            c2[:total] = child[:total]
            o2[:total] = owner[:total]
            child, owner = c2, o2
        for i in range(nk):
            child[total] = kept[i]
            owner[total] = p
            total += 1
    return child[:total].copy(), owner[:total].copy()


@njit(cache=True)
def offspring_checks(grid, dims, kbase, anchor, spacing, gpts, parents, radius, sep,
                     kid_ptr, kid_pts, cover):
    """Per parent: greedy packing count of its ball and the worst uncovered member distance.

    ``kid_pts[kid_ptr[p]:kid_ptr[p+1]]`` are the offspring of parent ``p``.
    The second output is 0 when every member lies within ``cover`` of an
    offspring, otherwise the largest nearest-offspring distance.
    """
    m = parents.shape[0]
    bound = np.zeros(m, np.int64)
    worst = np.zeros(m)
    buf = np.empty(gpts.shape[0], np.int64)
    for p in range(m):
        cnt = _ball_members(grid, dims, kbase, anchor, spacing, gpts, parents[p], radius, buf)
        if cnt == 0:
            bound[p] = 1
            continue
        pts = gpts[buf[:cnt]]
        rep = greedy_assign(pts, sep, False)
        nk = 0
        for i in range(cnt):
            if rep[i] == i:
                nk += 1
        bound[p] = nk
        kids = kid_pts[kid_ptr[p]:kid_ptr[p + 1]]
        if kids.shape[0] == 0:
            worst[p] = np.inf
            continue
        near = covered_within(pts, kids, cover, True)
        bad = False
        for i in range(cnt):
            if np.isinf(near[i]):
                bad = True
                break
        if bad:
            w = 0.0
            for i in range(cnt):
                best = np.inf
                for j in range(kids.shape[0]):
                    d2 = 0.0
                    for k in range(pts.shape[1]):
                        diff = pts[i, k] - kids[j, k]
                        d2 += diff * diff
                    if d2 < best:
                        best = d2
                w = max(w, np.sqrt(best))
            worst[p] = w
    return bound, worst
