"""Pure-numpy rasterizer kernels (fallback backend).

Same entry points and semantics as the compiled ``_raster_cy`` module:

``forward_cover``   z-buffered hard coverage plus the soft-silhouette alpha
                    accumulator (sum of per-triangle sigmoids of the signed
                    screen-space distance to the triangle boundary).
``backward_alpha``  gradient of that accumulator w.r.t. projected vertex
                    positions, for pixels where the upstream gradient is
                    nonzero.

Pixel (r, c) has its center at (c + 0.5, r + 0.5).
"""

import numpy as np

BACKEND = "numpy"
_DEGENERATE_AREA = 1e-14


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _triangle_setup(screen, faces, t, W, H, band):
    ia, ib, ic = (int(faces[t, 0]), int(faces[t, 1]), int(faces[t, 2]))
    ax, ay = screen[ia]
    bx, by = screen[ib]
    cx, cy = screen[ic]
    den = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if abs(den) < _DEGENERATE_AREA:
        return None
    x0 = max(0, int(np.floor(min(ax, bx, cx) - band - 0.5)))
    x1 = min(W - 1, int(np.ceil(max(ax, bx, cx) + band - 0.5)))
    y0 = max(0, int(np.floor(min(ay, by, cy) - band - 0.5)))
    y1 = min(H - 1, int(np.ceil(max(ay, by, cy) + band - 0.5)))
    if x0 > x1 or y0 > y1:
        return None
    return (ia, ib, ic), (ax, ay, bx, by, cx, cy), den, (x0, x1, y0, y1)


def _pixel_grid(x0, x1, y0, y1):
    px = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
    py = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
    return np.meshgrid(px, py)  # (rows, cols)


def _signed_distance(pxg, pyg, corners, den, inside):
    """Signed distance to the triangle boundary (+ inside), plus feature info.

    Returns (d, feat_edge, feat_kind) where feat_edge in {0,1,2} names the
    argmin edge ((a,b),(b,c),(c,a)) and feat_kind is 0 for an edge-line
    feature, 1 for corner q, 2 for corner r (outside pixels only).
    """
    ax, ay, bx, by, cx, cy = corners
    s = 1.0 if den > 0 else -1.0
    edges = ((ax, ay, bx, by), (bx, by, cx, cy), (cx, cy, ax, ay))

    line_d = np.empty((3,) + pxg.shape)
    seg_d = np.empty_like(line_d)
    tclamped = np.empty_like(line_d)
    for e, (qx, qy, rx, ry) in enumerate(edges):
        ex, ey = rx - qx, ry - qy
        L2 = ex * ex + ey * ey
        L = np.sqrt(L2)
        cross = ex * (pyg - qy) - ey * (pxg - qx)
        line_d[e] = s * cross / L
        tp = ((pxg - qx) * ex + (pyg - qy) * ey) / L2
        tc = np.clip(tp, 0.0, 1.0)
        tclamped[e] = tc
        dx = pxg - (qx + tc * ex)
        dy = pyg - (qy + tc * ey)
        seg_d[e] = np.sqrt(dx * dx + dy * dy)

    d_in = line_d.min(axis=0)
    edge_in = line_d.argmin(axis=0)
    d_out = -seg_d.min(axis=0)
    edge_out = seg_d.argmin(axis=0)
    d = np.where(inside, d_in, d_out)
    feat_edge = np.where(inside, edge_in, edge_out)
    t_at = np.take_along_axis(tclamped, feat_edge[None], axis=0)[0]
    feat_kind = np.where(inside, 0, np.where(t_at <= 0.0, 1, np.where(t_at >= 1.0, 2, 0)))
    return d, feat_edge, feat_kind


def forward_cover(screen, zcam, faces, H, W, sigma, band):
    """Rasterize coverage, band shading sources, and the alpha accumulator.

    Returns dict with per-pixel images: covered (u8), tri_cov/tri_band (i32,
    -1 where absent), affine barycentrics w0/w1 for both, zbuf, best_d, asum.
    """
    covered = np.zeros((H, W), dtype=np.uint8)
    tri_cov = np.full((H, W), -1, dtype=np.int32)
    tri_band = np.full((H, W), -1, dtype=np.int32)
    w0_cov = np.zeros((H, W))
    w1_cov = np.zeros((H, W))
    w0_band = np.zeros((H, W))
    w1_band = np.zeros((H, W))
    zbuf = np.full((H, W), np.inf)
    best_d = np.full((H, W), -np.inf)
    asum = np.zeros((H, W))

    for t in range(len(faces)):
        setup = _triangle_setup(screen, faces, t, W, H, band)
        if setup is None:
            continue
        (ia, ib, ic), corners, den, (x0, x1, y0, y1) = setup
        ax, ay, bx, by, cx, cy = corners
        pxg, pyg = _pixel_grid(x0, x1, y0, y1)

        wa = ((cx - bx) * (pyg - by) - (cy - by) * (pxg - bx)) / den
        wb = ((ax - cx) * (pyg - cy) - (ay - cy) * (pxg - cx)) / den
        wc = 1.0 - wa - wb
        inside = (wa >= 0.0) & (wb >= 0.0) & (wc >= 0.0)

        d, _, _ = _signed_distance(pxg, pyg, corners, den, inside)
        in_band = d > -band
        if in_band.any():
            contrib = np.zeros_like(d)
            contrib[in_band] = _sigmoid(d[in_band] / sigma)
            asum[y0:y1 + 1, x0:x1 + 1] += contrib

        sl = (slice(y0, y1 + 1), slice(x0, x1 + 1))
        if inside.any():
            za, zb, zc_ = zcam[ia], zcam[ib], zcam[ic]
            with np.errstate(divide="ignore"):
                zp = 1.0 / (wa / za + wb / zb + wc / zc_)
            win = inside & (zp < zbuf[sl])
            if win.any():
                zbuf[sl][win] = zp[win]
                covered[sl][win] = 1
                tri_cov[sl][win] = t
                w0_cov[sl][win] = wa[win]
                w1_cov[sl][win] = wb[win]
        upd = (~inside) & in_band & (d > best_d[sl])
        if upd.any():
            best_d[sl][upd] = d[upd]
            tri_band[sl][upd] = t
            w0_band[sl][upd] = wa[upd]
            w1_band[sl][upd] = wb[upd]

    return {
        "covered": covered, "tri_cov": tri_cov, "tri_band": tri_band,
        "w0_cov": w0_cov, "w1_cov": w1_cov, "w0_band": w0_band, "w1_band": w1_band,
        "zbuf": zbuf, "best_d": best_d, "asum": asum,
    }


def backward_alpha(screen, faces, H, W, sigma, band, g_asum):
    """Accumulate d(sum sigmoid(d_t/sigma) * g_asum) / d(screen coords).

    ``g_asum`` must already be zeroed where the alpha accumulator is
    saturated (asum >= 1).
    """
    g_screen = np.zeros_like(screen)
    nonzero_rows = np.nonzero(np.any(g_asum != 0.0, axis=1))[0]
    if len(nonzero_rows) == 0:
        return g_screen

    for t in range(len(faces)):
        setup = _triangle_setup(screen, faces, t, W, H, band)
        if setup is None:
            continue
        (ia, ib, ic), corners, den, (x0, x1, y0, y1) = setup
        g_local = g_asum[y0:y1 + 1, x0:x1 + 1]
        if not np.any(g_local != 0.0):
            continue
        ax, ay, bx, by, cx, cy = corners
        pxg, pyg = _pixel_grid(x0, x1, y0, y1)
        wa = ((cx - bx) * (pyg - by) - (cy - by) * (pxg - bx)) / den
        wb = ((ax - cx) * (pyg - cy) - (ay - cy) * (pxg - cx)) / den
        wc = 1.0 - wa - wb
        inside = (wa >= 0.0) & (wb >= 0.0) & (wc >= 0.0)
        d, feat_edge, feat_kind = _signed_distance(pxg, pyg, corners, den, inside)

        act = (d > -band) & (g_local != 0.0)
        if not act.any():
            continue
        sig = _sigmoid(d[act] / sigma)
        w = g_local[act] * sig * (1.0 - sig) / sigma  # dL/dd per active pixel

        s = 1.0 if den > 0 else -1.0
        idx = (ia, ib, ic)
        edges = ((ax, ay, bx, by, 0, 1), (bx, by, cx, cy, 1, 2), (cx, cy, ax, ay, 2, 0))
        fe = feat_edge[act]
        fk = feat_kind[act]
        px = pxg[act]
        py = pyg[act]
        for e, (qx, qy, rx, ry, qi, ri) in enumerate(edges):
            on_e = fe == e
            if not on_e.any():
                continue
            pex, pey, we = px[on_e], py[on_e], w[on_e]
            kind = fk[on_e]
            # edge-line feature: d = s * cross / L
            line = kind == 0
            if line.any():
                lx, ly, lw = pex[line], pey[line], we[line]
                ex, ey = rx - qx, ry - qy
                L = np.hypot(ex, ey)
                cross = ex * (ly - qy) - ey * (lx - qx)
                # grad of cross wrt q and r, then quotient rule with L
                dcr_qx, dcr_qy = ry - ly, lx - rx
                dcr_rx, dcr_ry = ly - qy, qx - lx
                dL_qx, dL_qy = (qx - rx) / L, (qy - ry) / L
                dL_rx, dL_ry = (rx - qx) / L, (ry - qy) / L
                coeff = s / L
                cc = s * cross / (L * L)
                g_screen[idx[qi], 0] += np.sum((coeff * dcr_qx - cc * dL_qx) * lw)
                g_screen[idx[qi], 1] += np.sum((coeff * dcr_qy - cc * dL_qy) * lw)
                g_screen[idx[ri], 0] += np.sum((coeff * dcr_rx - cc * dL_rx) * lw)
                g_screen[idx[ri], 1] += np.sum((coeff * dcr_ry - cc * dL_ry) * lw)
            # corner features: d = -|p - v|
            for kval, vi, vx, vy in ((1, qi, qx, qy), (2, ri, rx, ry)):
                corner = kind == kval
                if not corner.any():
                    continue
                kx, ky, kw = pex[corner], pey[corner], we[corner]
                dx, dy = kx - vx, ky - vy
                dist = np.hypot(dx, dy)
                dist = np.where(dist < 1e-12, 1e-12, dist)
                g_screen[idx[vi], 0] += float(np.sum(kw * dx / dist))
                g_screen[idx[vi], 1] += float(np.sum(kw * dy / dist))
    return g_screen
