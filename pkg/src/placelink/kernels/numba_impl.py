"""Numba ``@njit`` implementations of the hot kernels.

Mirror of ``numpy_impl`` function by function; the accumulation order and
tie-breaking are kept identical so the two backends agree bitwise. All
kernels compile with ``cache=True`` so repeated CLI invocations skip the
JIT cost.
"""

import numpy as np
from numba import njit

EARTH_RADIUS_M = 6_371_000.0


@njit(cache=True)
def haversine_m_batch(lat1, lon1, lat2, lon2):
    n = lat1.size
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        p1 = np.radians(lat1[i])
        p2 = np.radians(lat2[i])
        sdlat = np.sin((p2 - p1) * 0.5)
        sdlon = np.sin(np.radians(lon2[i] - lon1[i]) * 0.5)
        a = sdlat * sdlat + np.cos(p1) * np.cos(p2) * sdlon * sdlon
        if a > 1.0:
            a = 1.0
        out[i] = 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(a))
    return out


@njit(cache=True)
def _levenshtein_one(a, b, prev, cur):
    la = a.size
    lb = b.size
    if la == 0:
        return lb
    if lb == 0:
        return la
    for j in range(lb + 1):
        prev[j] = j
    for r in range(1, la + 1):
        cur[0] = r
        ca = a[r - 1]
        for j in range(1, lb + 1):
            sub = prev[j - 1] + (0 if b[j - 1] == ca else 1)
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            m = sub if sub < dele else dele
            cur[j] = m if m < ins else ins
        for j in range(lb + 1):
            tmp = prev[j]
            prev[j] = cur[j]
            cur[j] = tmp
    return prev[lb]


@njit(cache=True)
def levenshtein_batch(a_flat, a_off, b_flat, b_off):
    n = a_off.size - 1
    out = np.empty(n, dtype=np.int64)
    max_b = 0
    for i in range(n):
        lb = b_off[i + 1] - b_off[i]
        if lb > max_b:
            max_b = lb
    prev = np.empty(max_b + 1, dtype=np.int64)
    cur = np.empty(max_b + 1, dtype=np.int64)
    for i in range(n):
        out[i] = _levenshtein_one(
            a_flat[a_off[i]:a_off[i + 1]],
            b_flat[b_off[i]:b_off[i + 1]],
            prev,
            cur,
        )
    return out


@njit(cache=True)
def _jaro_counts(a, b, a_match, b_taken):
    la = a.size
    lb = b.size
    w = (la if la > lb else lb) // 2 - 1
    if w < 0:
        w = 0
    for i in range(la):
        a_match[i] = False
    for j in range(lb):
        b_taken[j] = False
    c = 0
    for i in range(la):
        lo = i - w if i - w > 0 else 0
        hi = i + w + 1 if i + w + 1 < lb else lb
        for j in range(lo, hi):
            if not b_taken[j] and b[j] == a[i]:
                b_taken[j] = True
                a_match[i] = True
                c += 1
                break
    if c == 0:
        return 0, 0
    t = 0
    j = 0
    for i in range(la):
        if a_match[i]:
            while not b_taken[j]:
                j += 1
            if a[i] != b[j]:
                t += 1
            j += 1
    return c, t


@njit(cache=True)
def jaro_distance_batch(a_flat, a_off, b_flat, b_off):
    n = a_off.size - 1
    out = np.empty(n, dtype=np.float64)
    max_a = 0
    max_b = 0
    for i in range(n):
        la = a_off[i + 1] - a_off[i]
        lb = b_off[i + 1] - b_off[i]
        if la > max_a:
            max_a = la
        if lb > max_b:
            max_b = lb
    a_match = np.empty(max_a, dtype=np.bool_)
    b_taken = np.empty(max_b, dtype=np.bool_)
    for i in range(n):
        a = a_flat[a_off[i]:a_off[i + 1]]
        b = b_flat[b_off[i]:b_off[i + 1]]
        la = a.size
        lb = b.size
        if la == 0 and lb == 0:
            out[i] = 0.0
            continue
        c, t = _jaro_counts(a, b, a_match, b_taken)
        if c == 0:
            out[i] = 1.0
        else:
            s = c / la + c / lb + (c - t / 2.0) / c
            out[i] = (3.0 - s) / 3.0
    return out


@njit(cache=True)
def geohash_encode_batch(lats, lons, precision):
    n = lats.size
    out = np.zeros(n, dtype=np.uint64)
    for k in range(n):
        lon_lo = -180.0
        lon_hi = 180.0
        lat_lo = -90.0
        lat_hi = 90.0
        bits = np.uint64(0)
        even = True
        for _ in range(5 * precision):
            bits = bits << np.uint64(1)
            if even:
                mid = (lon_lo + lon_hi) * 0.5
                if lons[k] >= mid:
                    bits = bits | np.uint64(1)
                    lon_lo = mid
                else:
                    lon_hi = mid
            else:
                mid = (lat_lo + lat_hi) * 0.5
                if lats[k] >= mid:
                    bits = bits | np.uint64(1)
                    lat_lo = mid
                else:
                    lat_hi = mid
            even = not even
        out[k] = bits
    return out


@njit(cache=True)
def best_split_gini(x, y, w, feature_ids, min_leaf):
    n = y.size
    total_w = 0.0
    total_w1 = 0.0
    for i in range(n):
        total_w += w[i]
        total_w1 += w[i] * y[i]
    parent = total_w - (total_w1 * total_w1 + (total_w - total_w1) ** 2) / total_w
    best_feat = -1
    best_thr = 0.0
    best_gain = 1e-12
    for fi in range(feature_ids.size):
        f = feature_ids[fi]
        col = x[:, f].copy()
        order = np.argsort(col, kind="mergesort")
        cw = 0.0
        cw1 = 0.0
        for i in range(n - 1):
            oi = order[i]
            cw += w[oi]
            cw1 += w[oi] * y[oi]
            xs_i = col[order[i]]
            xs_next = col[order[i + 1]]
            cnt = i + 1
            if xs_next <= xs_i:
                continue
            if cnt < min_leaf or n - cnt < min_leaf:
                continue
            if cw <= 0.0 or total_w - cw <= 0.0:
                continue
            lw = cw
            lw1 = cw1
            rw = total_w - lw
            rw1 = total_w1 - lw1
            g_left = lw - (lw1 * lw1 + (lw - lw1) ** 2) / lw
            g_right = rw - (rw1 * rw1 + (rw - rw1) ** 2) / rw
            gain = parent - g_left - g_right
            if gain > best_gain:
                best_gain = gain
                best_feat = f
                best_thr = (xs_i + xs_next) * 0.5
    return best_feat, best_thr, best_gain


@njit(cache=True)
def best_split_sse(x, g, feature_ids, min_leaf):
    n = g.size
    total = 0.0
    for i in range(n):
        total += g[i]
    parent = total * total / n
    best_feat = -1
    best_thr = 0.0
    best_gain = 1e-12
    for fi in range(feature_ids.size):
        f = feature_ids[fi]
        col = x[:, f].copy()
        order = np.argsort(col, kind="mergesort")
        cs = 0.0
        for i in range(n - 1):
            cs += g[order[i]]
            xs_i = col[order[i]]
            xs_next = col[order[i + 1]]
            cnt = i + 1
            if xs_next <= xs_i:
                continue
            if cnt < min_leaf or n - cnt < min_leaf:
                continue
            rs = total - cs
            gain = cs * cs / cnt + rs * rs / (n - cnt) - parent
            if gain > best_gain:
                best_gain = gain
                best_feat = f
                best_thr = (xs_i + xs_next) * 0.5
    return best_feat, best_thr, best_gain
