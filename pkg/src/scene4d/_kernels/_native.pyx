# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled spatial-hash kernels.

Mirrors scene4d._kernels.fallback exactly: ring-expansion exact KNN with
(distance, index) tie-breaking, early-out radius membership, and min pairwise
squared distance. Distance accumulation order matches the python backend so
both produce bit-identical floats (the extension is compiled with FP
contraction off).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


cdef inline long long _imax(long long a, long long b) nogil:
    return a if a > b else b


cdef inline long long _iabs(long long a) nogil:
    return a if a >= 0 else -a


cdef inline long long _deficit(long long qc, long long dim) nogil:
    # rings needed before a shell around cell qc can reach [0, dim)
    if qc < 0:
        return -qc
    if qc >= dim:
        return qc - dim + 1
    return 0


cdef inline long long _lower_bound(const long long* codes, long long n, long long key) nogil:
    cdef long long lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if codes[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline long long _upper_bound(const long long* codes, long long n, long long key) nogil:
    cdef long long lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if codes[mid] <= key:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline void _insert_best(double* bd, long long* bi, int* cnt, int k,
                              double d2, long long pi) nogil:
    cdef int pos
    if cnt[0] == k:
        if d2 > bd[k - 1] or (d2 == bd[k - 1] and pi > bi[k - 1]):
            return
        pos = k - 1
    else:
        pos = cnt[0]
        cnt[0] += 1
    while pos > 0 and (d2 < bd[pos - 1] or (d2 == bd[pos - 1] and pi < bi[pos - 1])):
        bd[pos] = bd[pos - 1]
        bi[pos] = bi[pos - 1]
        pos -= 1
    bd[pos] = d2
    bi[pos] = pi


cdef void _scan_cell(const double* pts, const long long* order, const long long* codes,
                     long long n, long long code, double qx, double qy, double qz,
                     double* bd, long long* bi, int* cnt, int k) nogil:
    cdef long long lo = _lower_bound(codes, n, code)
    cdef long long hi = _upper_bound(codes, n, code)
    cdef long long j, pi
    cdef double dx, dy, dz, d2
    for j in range(lo, hi):
        pi = order[j]
        dx = qx - pts[3 * pi]
        dy = qy - pts[3 * pi + 1]
        dz = qz - pts[3 * pi + 2]
        d2 = (dx * dx + dy * dy) + dz * dz
        _insert_best(bd, bi, cnt, k, d2, pi)


cdef void _knn_one(const double* pts, const long long* order, const long long* codes,
                   long long n, double ox, double oy, double oz, double h,
                   long long dx, long long dy, long long dz,
                   double qx, double qy, double qz, int k,
                   long long* idx_out, double* d2_out) nogil:
    cdef double bd[256]
    cdef long long bi[256]
    cdef int cnt = 0
    cdef long long qcx = <long long>floor((qx - ox) / h)
    cdef long long qcy = <long long>floor((qy - oy) / h)
    cdef long long qcz = <long long>floor((qz - oz) / h)
    cdef long long rho_max = _imax(
        _imax(_imax(_iabs(qcx), _iabs(dx - 1 - qcx)),
              _imax(_iabs(qcy), _iabs(dy - 1 - qcy))),
        _imax(_iabs(qcz), _iabs(dz - 1 - qcz)))
    # rings closer than the box hold no cells; jump straight to it
    cdef long long rho = _imax(
        _imax(_deficit(qcx, dx), _deficit(qcy, dy)), _deficit(qcz, dz))
    cdef long long cx, cy, cz, x0, x1, y0, y1, z0, z1, yi0, yi1, code
    cdef double bound
    cdef int j
    cdef bint xlo_ok, xhi_ok, ylo_ok, yhi_ok
    while rho <= rho_max:
        # cells at Chebyshev distance exactly rho, clipped to the grid;
        # face rows and the two interior x columns enumerated separately
        x0 = qcx - rho
        if x0 < 0:
            x0 = 0
        x1 = qcx + rho
        if x1 > dx - 1:
            x1 = dx - 1
        y0 = qcy - rho
        if y0 < 0:
            y0 = 0
        y1 = qcy + rho
        if y1 > dy - 1:
            y1 = dy - 1
        z0 = qcz - rho
        if z0 < 0:
            z0 = 0
        z1 = qcz + rho
        if z1 > dz - 1:
            z1 = dz - 1
        yi0 = qcy - rho + 1
        if yi0 < 0:
            yi0 = 0
        yi1 = qcy + rho - 1
        if yi1 > dy - 1:
            yi1 = dy - 1
        xlo_ok = qcx - rho >= 0 and qcx - rho < dx
        xhi_ok = rho > 0 and qcx + rho >= 0 and qcx + rho < dx
        ylo_ok = qcy - rho >= 0 and qcy - rho < dy
        yhi_ok = rho > 0 and qcy + rho >= 0 and qcy + rho < dy
        for cz in range(z0, z1 + 1):
            if _iabs(cz - qcz) == rho:
                for cy in range(y0, y1 + 1):
                    for cx in range(x0, x1 + 1):
                        code = cx + dx * (cy + dy * cz)
                        _scan_cell(pts, order, codes, n, code, qx, qy, qz,
                                   bd, bi, &cnt, k)
                continue
            if ylo_ok:
                for cx in range(x0, x1 + 1):
                    code = cx + dx * ((qcy - rho) + dy * cz)
                    _scan_cell(pts, order, codes, n, code, qx, qy, qz,
                               bd, bi, &cnt, k)
            if yhi_ok:
                for cx in range(x0, x1 + 1):
                    code = cx + dx * ((qcy + rho) + dy * cz)
                    _scan_cell(pts, order, codes, n, code, qx, qy, qz,
                               bd, bi, &cnt, k)
            if xlo_ok or xhi_ok:
                for cy in range(yi0, yi1 + 1):
                    if xlo_ok:
                        code = (qcx - rho) + dx * (cy + dy * cz)
                        _scan_cell(pts, order, codes, n, code, qx, qy, qz,
                                   bd, bi, &cnt, k)
                    if xhi_ok:
                        code = (qcx + rho) + dx * (cy + dy * cz)
                        _scan_cell(pts, order, codes, n, code, qx, qy, qz,
                                   bd, bi, &cnt, k)
        if cnt == k:
            bound = rho * h
            if bd[k - 1] < bound * bound:
                break
        rho += 1
    for j in range(k):
        idx_out[j] = bi[j]
        d2_out[j] = bd[j]


def knn(double[:, ::1] points, long long[::1] order, long long[::1] codes,
        double[::1] origin, double cell, long long[::1] dims,
        double[:, ::1] queries, int k):
    cdef long long n = points.shape[0]
    cdef long long m = queries.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for {n} points")
    if k > 256:
        raise ValueError("k > 256 not supported by the native backend")
    idx_out = np.empty((m, k), dtype=np.int64)
    d2_out = np.empty((m, k), dtype=np.float64)
    cdef long long[:, ::1] iv = idx_out
    cdef double[:, ::1] dv = d2_out
    cdef long long mi
    with nogil:
        for mi in range(m):
            _knn_one(&points[0, 0], &order[0], &codes[0], n,
                     origin[0], origin[1], origin[2], cell,
                     dims[0], dims[1], dims[2],
                     queries[mi, 0], queries[mi, 1], queries[mi, 2], k,
                     &iv[mi, 0], &dv[mi, 0])
    return idx_out, d2_out


cdef bint _cell_hit(const double* pts, const long long* order, const long long* codes,
                    long long n, long long code, double qx, double qy, double qz,
                    double r2) nogil:
    cdef long long lo = _lower_bound(codes, n, code)
    cdef long long hi = _upper_bound(codes, n, code)
    cdef long long j, pi
    cdef double dx, dy, dz, d2
    for j in range(lo, hi):
        pi = order[j]
        dx = qx - pts[3 * pi]
        dy = qy - pts[3 * pi + 1]
        dz = qz - pts[3 * pi + 2]
        d2 = (dx * dx + dy * dy) + dz * dz
        if d2 <= r2:
            return True
    return False


def within_radius(double[:, ::1] points, long long[::1] order, long long[::1] codes,
                  double[::1] origin, double cell, long long[::1] dims,
                  double[:, ::1] queries, double radius):
    cdef long long n = points.shape[0]
    cdef long long m = queries.shape[0]
    cdef double r2 = radius * radius
    out = np.zeros(m, dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    cdef double ox = origin[0], oy = origin[1], oz = origin[2], h = cell
    cdef long long dx = dims[0], dy = dims[1], dz = dims[2]
    cdef long long mi, qcx, qcy, qcz, rho, rho_max, cx, cy, cz, x0, x1, code
    cdef double qx, qy, qz
    cdef bint hit
    with nogil:
        for mi in range(m):
            qx = queries[mi, 0]
            qy = queries[mi, 1]
            qz = queries[mi, 2]
            qcx = <long long>floor((qx - ox) / h)
            qcy = <long long>floor((qy - oy) / h)
            qcz = <long long>floor((qz - oz) / h)
            rho_max = _imax(
                _imax(_imax(_iabs(qcx), _iabs(dx - 1 - qcx)),
                      _imax(_iabs(qcy), _iabs(dy - 1 - qcy))),
                _imax(_iabs(qcz), _iabs(dz - 1 - qcz)))
            hit = False
            rho = 0
            while rho <= rho_max and not hit:
                # unseen rings are at distance >= rho*h > radius: stop
                if rho > 0 and (rho - 1) * h > radius:
                    break
                for cz in range(qcz - rho, qcz + rho + 1):
                    if hit or cz < 0 or cz >= dz:
                        continue
                    for cy in range(qcy - rho, qcy + rho + 1):
                        if hit or cy < 0 or cy >= dy:
                            continue
                        if _iabs(cz - qcz) == rho or _iabs(cy - qcy) == rho:
                            x0 = qcx - rho
                            if x0 < 0:
                                x0 = 0
                            x1 = qcx + rho
                            if x1 > dx - 1:
                                x1 = dx - 1
                            for cx in range(x0, x1 + 1):
                                code = cx + dx * (cy + dy * cz)
                                if _cell_hit(&points[0, 0], &order[0], &codes[0], n,
                                             code, qx, qy, qz, r2):
                                    hit = True
                                    break
                        else:
                            if qcx - rho >= 0 and qcx - rho < dx:
                                code = (qcx - rho) + dx * (cy + dy * cz)
                                if _cell_hit(&points[0, 0], &order[0], &codes[0], n,
                                             code, qx, qy, qz, r2):
                                    hit = True
                            if not hit and rho > 0 and qcx + rho >= 0 and qcx + rho < dx:
                                code = (qcx + rho) + dx * (cy + dy * cz)
                                if _cell_hit(&points[0, 0], &order[0], &codes[0], n,
                                             code, qx, qy, qz, r2):
                                    hit = True
                rho += 1
            ov[mi] = 1 if hit else 0
    return out.astype(bool)


def min_squared_distance(double[:, ::1] a, double[:, ::1] b):
    cdef long long na = a.shape[0]
    cdef long long nb = b.shape[0]
    if na == 0 or nb == 0:
        raise ValueError("min_squared_distance on empty set")
    cdef double best = np.inf
    cdef double dx, dy, dz, d2
    cdef long long i, j
    with nogil:
        for i in range(na):
            for j in range(nb):
                dx = a[i, 0] - b[j, 0]
                dy = a[i, 1] - b[j, 1]
                dz = a[i, 2] - b[j, 2]
                d2 = (dx * dx + dy * dy) + dz * dz
                if d2 < best:
                    best = d2
    return best
