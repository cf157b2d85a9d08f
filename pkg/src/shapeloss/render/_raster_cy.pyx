# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled rasterizer kernels; semantics mirror ``_raster_np`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, exp, floor, sqrt

cnp.import_array()

BACKEND = "cython"

cdef double _DEGENERATE_AREA = 1e-14


cdef inline double _sigmoid(double x) nogil:
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    cdef double e = exp(x)
    return e / (1.0 + e)


cdef inline double _min3(double a, double b, double c) nogil:
    cdef double m = a
    if b < m:
        m = b
    if c < m:
        m = c
    return m


cdef struct DistInfo:
    double d
    int edge      # argmin edge index
    int kind      # 0 line, 1 corner q, 2 corner r


cdef DistInfo _signed_distance(double px, double py,
                               double ax, double ay, double bx, double by,
                               double cx, double cy, double s, bint inside) nogil:
    """Signed distance (+ inside) to the triangle boundary plus feature info."""
    cdef DistInfo out
    cdef double qx[3]
    cdef double qy[3]
    cdef double rx[3]
    cdef double ry[3]
    qx[0] = ax; qy[0] = ay; rx[0] = bx; ry[0] = by
    qx[1] = bx; qy[1] = by; rx[1] = cx; ry[1] = cy
    qx[2] = cx; qy[2] = cy; rx[2] = ax; ry[2] = ay

    cdef int e, best
    cdef double ex, ey, L2, L, cross, tp, dx, dy, dist, val
    cdef double bestval
    if inside:
        best = 0
        bestval = 1e300
        for e in range(3):
            ex = rx[e] - qx[e]
            ey = ry[e] - qy[e]
            L = sqrt(ex * ex + ey * ey)
            cross = ex * (py - qy[e]) - ey * (px - qx[e])
            val = s * cross / L
            if val < bestval:
                bestval = val
                best = e
        out.d = bestval
        out.edge = best
        out.kind = 0
        return out
    best = 0
    bestval = 1e300
    cdef double best_t = 0.0
    cdef double tclamp
    for e in range(3):
        ex = rx[e] - qx[e]
        ey = ry[e] - qy[e]
        L2 = ex * ex + ey * ey
        tp = ((px - qx[e]) * ex + (py - qy[e]) * ey) / L2
        tclamp = tp
        if tclamp < 0.0:
            tclamp = 0.0
        elif tclamp > 1.0:
            tclamp = 1.0
        dx = px - (qx[e] + tclamp * ex)
        dy = py - (qy[e] + tclamp * ey)
        dist = sqrt(dx * dx + dy * dy)
        if dist < bestval:
            bestval = dist
            best = e
            best_t = tclamp
    out.d = -bestval
    out.edge = best
    if best_t <= 0.0:
        out.kind = 1
    elif best_t >= 1.0:
        out.kind = 2
    else:
        out.kind = 0
    return out


def forward_cover(double[:, ::1] screen, double[::1] zcam, int[:, ::1] faces,
                  int H, int W, double sigma, double band):
    covered_np = np.zeros((H, W), dtype=np.uint8)
    tri_cov_np = np.full((H, W), -1, dtype=np.int32)
    tri_band_np = np.full((H, W), -1, dtype=np.int32)
    w0_cov_np = np.zeros((H, W))
    w1_cov_np = np.zeros((H, W))
    w0_band_np = np.zeros((H, W))
    w1_band_np = np.zeros((H, W))
    zbuf_np = np.full((H, W), np.inf)
    best_d_np = np.full((H, W), -np.inf)
    asum_np = np.zeros((H, W))

    cdef unsigned char[:, ::1] covered = covered_np
    cdef int[:, ::1] tri_cov = tri_cov_np
    cdef int[:, ::1] tri_band = tri_band_np
    cdef double[:, ::1] w0_cov = w0_cov_np
    cdef double[:, ::1] w1_cov = w1_cov_np
    cdef double[:, ::1] w0_band = w0_band_np
    cdef double[:, ::1] w1_band = w1_band_np
    cdef double[:, ::1] zbuf = zbuf_np
    cdef double[:, ::1] best_d = best_d_np
    cdef double[:, ::1] asum = asum_np

    cdef int F = faces.shape[0]
    cdef int t, ia, ib, ic, x0, x1, y0, y1, pxi, pyi
    cdef double ax, ay, bx, by, cx, cy, den, s
    cdef double px, py, wa, wb, wc, za, zb, zc, zp
    cdef bint inside
    cdef DistInfo di
    with nogil:
        for t in range(F):
            ia = faces[t, 0]; ib = faces[t, 1]; ic = faces[t, 2]
            ax = screen[ia, 0]; ay = screen[ia, 1]
            bx = screen[ib, 0]; by = screen[ib, 1]
            cx = screen[ic, 0]; cy = screen[ic, 1]
            den = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if den < _DEGENERATE_AREA and den > -_DEGENERATE_AREA:
                continue
            s = 1.0 if den > 0 else -1.0
            x0 = <int>floor(_min3(ax, bx, cx) - band - 0.5)
            x1 = <int>ceil(-_min3(-ax, -bx, -cx) + band - 0.5)
            y0 = <int>floor(_min3(ay, by, cy) - band - 0.5)
            y1 = <int>ceil(-_min3(-ay, -by, -cy) + band - 0.5)
            if x0 < 0: x0 = 0
            if y0 < 0: y0 = 0
            if x1 > W - 1: x1 = W - 1
            if y1 > H - 1: y1 = H - 1
            if x0 > x1 or y0 > y1:
                continue
            za = zcam[ia]; zb = zcam[ib]; zc = zcam[ic]
            for pyi in range(y0, y1 + 1):
                py = pyi + 0.5
                for pxi in range(x0, x1 + 1):
                    px = pxi + 0.5
                    wa = ((cx - bx) * (py - by) - (cy - by) * (px - bx)) / den
                    wb = ((ax - cx) * (py - cy) - (ay - cy) * (px - cx)) / den
                    wc = 1.0 - wa - wb
                    inside = wa >= 0.0 and wb >= 0.0 and wc >= 0.0
                    di = _signed_distance(px, py, ax, ay, bx, by, cx, cy, s, inside)
                    if di.d > -band:
                        asum[pyi, pxi] += _sigmoid(di.d / sigma)
                    if inside:
                        zp = 1.0 / (wa / za + wb / zb + wc / zc)
                        if zp < zbuf[pyi, pxi]:
                            zbuf[pyi, pxi] = zp
                            covered[pyi, pxi] = 1
                            tri_cov[pyi, pxi] = t
                            w0_cov[pyi, pxi] = wa
                            w1_cov[pyi, pxi] = wb
                    elif di.d > -band and di.d > best_d[pyi, pxi]:
                        best_d[pyi, pxi] = di.d
                        tri_band[pyi, pxi] = t
                        w0_band[pyi, pxi] = wa
                        w1_band[pyi, pxi] = wb

    return {
        "covered": covered_np, "tri_cov": tri_cov_np, "tri_band": tri_band_np,
        "w0_cov": w0_cov_np, "w1_cov": w1_cov_np,
        "w0_band": w0_band_np, "w1_band": w1_band_np,
        "zbuf": zbuf_np, "best_d": best_d_np, "asum": asum_np,
    }


def backward_alpha(double[:, ::1] screen, int[:, ::1] faces,
                   int H, int W, double sigma, double band,
                   double[:, ::1] g_asum):
    g_screen_np = np.zeros((screen.shape[0], 2))
    cdef double[:, ::1] g_screen = g_screen_np

    cdef int F = faces.shape[0]
    cdef int t, x0, x1, y0, y1, pxi, pyi, e, vi
    cdef int idx[3]
    cdef double qx[3]
    cdef double qy[3]
    cdef double rx[3]
    cdef double ry[3]
    cdef int qi[3]
    cdef int ri[3]
    qi[0] = 0; ri[0] = 1
    qi[1] = 1; ri[1] = 2
    qi[2] = 2; ri[2] = 0
    cdef double ax, ay, bx, by, cx, cy, den, s
    cdef double px, py, wa, wb, wc, g, sig, w
    cdef double ex, ey, L, cross, coeff, cc
    cdef double dcr_qx, dcr_qy, dcr_rx, dcr_ry, dL_qx, dL_qy, dL_rx, dL_ry
    cdef double vx, vy, dx, dy, dist
    cdef bint inside
    cdef DistInfo di
    with nogil:
        for t in range(F):
            idx[0] = faces[t, 0]; idx[1] = faces[t, 1]; idx[2] = faces[t, 2]
            ax = screen[idx[0], 0]; ay = screen[idx[0], 1]
            bx = screen[idx[1], 0]; by = screen[idx[1], 1]
            cx = screen[idx[2], 0]; cy = screen[idx[2], 1]
            den = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if den < _DEGENERATE_AREA and den > -_DEGENERATE_AREA:
                continue
            s = 1.0 if den > 0 else -1.0
            x0 = <int>floor(_min3(ax, bx, cx) - band - 0.5)
            x1 = <int>ceil(-_min3(-ax, -bx, -cx) + band - 0.5)
            y0 = <int>floor(_min3(ay, by, cy) - band - 0.5)
            y1 = <int>ceil(-_min3(-ay, -by, -cy) + band - 0.5)
            if x0 < 0: x0 = 0
            if y0 < 0: y0 = 0
            if x1 > W - 1: x1 = W - 1
            if y1 > H - 1: y1 = H - 1
            if x0 > x1 or y0 > y1:
                continue
            qx[0] = ax; qy[0] = ay; rx[0] = bx; ry[0] = by
            qx[1] = bx; qy[1] = by; rx[1] = cx; ry[1] = cy
            qx[2] = cx; qy[2] = cy; rx[2] = ax; ry[2] = ay
            for pyi in range(y0, y1 + 1):
                py = pyi + 0.5
                for pxi in range(x0, x1 + 1):
                    g = g_asum[pyi, pxi]
                    if g == 0.0:
                        continue
                    px = pxi + 0.5
                    wa = ((cx - bx) * (py - by) - (cy - by) * (px - bx)) / den
                    wb = ((ax - cx) * (py - cy) - (ay - cy) * (px - cx)) / den
                    wc = 1.0 - wa - wb
                    inside = wa >= 0.0 and wb >= 0.0 and wc >= 0.0
                    di = _signed_distance(px, py, ax, ay, bx, by, cx, cy, s, inside)
                    if di.d <= -band:
                        continue
                    sig = _sigmoid(di.d / sigma)
                    w = g * sig * (1.0 - sig) / sigma
                    e = di.edge
                    if di.kind == 0:
                        ex = rx[e] - qx[e]
                        ey = ry[e] - qy[e]
                        L = sqrt(ex * ex + ey * ey)
                        cross = ex * (py - qy[e]) - ey * (px - qx[e])
                        dcr_qx = ry[e] - py
                        dcr_qy = px - rx[e]
                        dcr_rx = py - qy[e]
                        dcr_ry = qx[e] - px
                        dL_qx = (qx[e] - rx[e]) / L
                        dL_qy = (qy[e] - ry[e]) / L
                        dL_rx = (rx[e] - qx[e]) / L
                        dL_ry = (ry[e] - qy[e]) / L
                        coeff = s / L
                        cc = s * cross / (L * L)
                        g_screen[idx[qi[e]], 0] += (coeff * dcr_qx - cc * dL_qx) * w
                        g_screen[idx[qi[e]], 1] += (coeff * dcr_qy - cc * dL_qy) * w
                        g_screen[idx[ri[e]], 0] += (coeff * dcr_rx - cc * dL_rx) * w
                        g_screen[idx[ri[e]], 1] += (coeff * dcr_ry - cc * dL_ry) * w
                    else:
                        if di.kind == 1:
                            vi = idx[qi[e]]
                            vx = qx[e]
                            vy = qy[e]
                        else:
                            vi = idx[ri[e]]
                            vx = rx[e]
                            vy = ry[e]
                        dx = px - vx
                        dy = py - vy
                        dist = sqrt(dx * dx + dy * dy)
                        if dist < 1e-12:
                            dist = 1e-12
                        g_screen[vi, 0] += w * dx / dist
                        g_screen[vi, 1] += w * dy / dist
    return g_screen_np
