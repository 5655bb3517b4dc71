"""Pure-numpy implementations of the hot numeric kernels.

This is the fallback backend; ``placelink.kernels.numba_impl`` mirrors every
function here with an ``@njit`` version. Keep the arithmetic (midpoint
formula, tie-breaking, scan order) in lockstep between the two files: the
string and geohash kernels then agree bitwise, and the split-search kernels
agree in their chosen (feature, threshold) with gains equal to float
rounding (numpy's SIMD cumsum sums in a different order than a plain loop).

String arguments use a CSR-style packed layout: one flat int32 array of code
points plus an int64 offsets array of length n+1; pair i is
``flat[off[i]:off[i+1]]``.
"""

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


def haversine_m_batch(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters between paired coordinate arrays."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    sdlat = np.sin((p2 - p1) * 0.5)
    sdlon = np.sin(np.radians(lon2 - lon1) * 0.5)
    a = sdlat * sdlat + np.cos(p1) * np.cos(p2) * sdlon * sdlon
    # clip guards asin from 1 + 1e-17 style rounding on antipodal points
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(a, 1.0)))


def _levenshtein_one(a, b):
    la, lb = a.size, b.size
    if la == 0:
        return lb
    if lb == 0:
        return la
    idx = np.arange(lb + 1, dtype=np.int64)
    prev = idx.copy()
    for r in range(1, la + 1):
        cur = np.empty(lb + 1, dtype=np.int64)
        cur[0] = r
        cur[1:] = np.minimum(prev[:-1] + (b != a[r - 1]), prev[1:] + 1)
        # left-to-right insertion propagation as a min-plus prefix scan:
        # cur[j] = j + min_{k<=j}(cur[k] - k)
        cur = np.minimum.accumulate(cur - idx) + idx
        prev = cur
    return int(prev[lb])


def levenshtein_batch(a_flat, a_off, b_flat, b_off):
    n = a_off.size - 1
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _levenshtein_one(
            a_flat[a_off[i]:a_off[i + 1]], b_flat[b_off[i]:b_off[i + 1]]
        )
    return out


def _jaro_counts(a, b):
    """Match count c and raw transposition count t for the Jaro formula."""
    la, lb = a.size, b.size
    w = max(la, lb) // 2 - 1
    if w < 0:
        w = 0
    b_taken = np.zeros(lb, dtype=np.bool_)
    a_match = np.zeros(la, dtype=np.bool_)
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


def jaro_distance_batch(a_flat, a_off, b_flat, b_off):
    n = a_off.size - 1
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        a = a_flat[a_off[i]:a_off[i + 1]]
        b = b_flat[b_off[i]:b_off[i + 1]]
        la, lb = a.size, b.size
        if la == 0 and lb == 0:
            out[i] = 0.0
            continue
        c, t = _jaro_counts(a, b)
        if c == 0:
            out[i] = 1.0
        else:
            s = c / la + c / lb + (c - t / 2.0) / c
            out[i] = (3.0 - s) / 3.0
    return out


def geohash_encode_batch(lats, lons, precision):
    """Interleaved-bisection geohash bits (lon bit first), packed in uint64."""
    n = lats.size
    bits = np.zeros(n, dtype=np.uint64)
    lon_lo = np.full(n, -180.0)
    lon_hi = np.full(n, 180.0)
    lat_lo = np.full(n, -90.0)
    lat_hi = np.full(n, 90.0)
    even = True
    for _ in range(5 * precision):
        bits <<= np.uint64(1)
        if even:
            mid = (lon_lo + lon_hi) * 0.5
            ge = lons >= mid
            lon_lo = np.where(ge, mid, lon_lo)
            lon_hi = np.where(ge, lon_hi, mid)
        else:
            mid = (lat_lo + lat_hi) * 0.5
            ge = lats >= mid
            lat_lo = np.where(ge, mid, lat_lo)
            lat_hi = np.where(ge, lat_hi, mid)
        bits |= ge.astype(np.uint64)
        even = not even
    return bits


def best_split_gini(x, y, w, feature_ids, min_leaf):
    """Exhaustive threshold search minimizing weighted two-class Gini.

    Returns (feature, threshold, gain) with feature = -1 when no split with
    positive gain exists. Gain is the decrease in weighted impurity mass
    G(S) = W_S - (W1^2 + (W-W1)^2) / W_S. Ties break toward the first
    candidate in (feature order, ascending threshold) scan order.
    """
    total_w = float(np.sum(w))
    total_w1 = float(np.sum(w * y))
    n = y.size
    parent = total_w - (total_w1 * total_w1 + (total_w - total_w1) ** 2) / total_w
    best_feat = -1
    best_thr = 0.0
    best_gain = 1e-12
    for f in feature_ids:
        col = x[:, f]
        order = np.argsort(col, kind="mergesort")
        xs = col[order]
        cw = np.cumsum(w[order])
        cw1 = np.cumsum((w * y)[order])
        counts = np.arange(1, n, dtype=np.int64)
        lw = cw[:-1]
        lw1 = cw1[:-1]
        rw = total_w - lw
        rw1 = total_w1 - lw1
        with np.errstate(divide="ignore", invalid="ignore"):
            g_left = lw - (lw1 * lw1 + (lw - lw1) ** 2) / lw
            g_right = rw - (rw1 * rw1 + (rw - rw1) ** 2) / rw
        gains = parent - g_left - g_right
        valid = (
            (xs[1:] > xs[:-1])
            & (counts >= min_leaf)
            & (n - counts >= min_leaf)
            & (lw > 0.0)
            & (rw > 0.0)
        )
        if not np.any(valid):
            continue
        gains = np.where(valid, gains, -np.inf)
        k = int(np.argmax(gains))
        if gains[k] > best_gain:
            best_gain = float(gains[k])
            best_feat = int(f)
            best_thr = (xs[k] + xs[k + 1]) * 0.5
    return best_feat, best_thr, best_gain


def best_split_sse(x, g, feature_ids, min_leaf):
    """Threshold search maximizing squared-error reduction on targets g.

    Gain = S_L^2/n_L + S_R^2/n_R - S^2/n (the sum-of-squares terms cancel).
    Same tie-breaking contract as best_split_gini.
    """
    n = g.size
    total = float(np.sum(g))
    parent = total * total / n
    best_feat = -1
    best_thr = 0.0
    best_gain = 1e-12
    for f in feature_ids:
        col = x[:, f]
        order = np.argsort(col, kind="mergesort")
        xs = col[order]
        cs = np.cumsum(g[order])
        counts = np.arange(1, n, dtype=np.int64)
        ls = cs[:-1]
        rs = total - ls
        gains = ls * ls / counts + rs * rs / (n - counts) - parent
        valid = (xs[1:] > xs[:-1]) & (counts >= min_leaf) & (n - counts >= min_leaf)
        if not np.any(valid):
            continue
        gains = np.where(valid, gains, -np.inf)
        k = int(np.argmax(gains))
        if gains[k] > best_gain:
            best_gain = float(gains[k])
            best_feat = int(f)
            best_thr = (xs[k] + xs[k + 1]) * 0.5
    return best_feat, best_thr, best_gain
