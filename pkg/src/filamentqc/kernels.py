"""Hot numeric kernels with numba and pure-numpy twins.

The two families here dominate pipeline runtime:

* ``splat_zbuffer_*`` rasterize projected points into depth/index buffers
  with nearest-wins semantics and deterministic tie-breaking,
* ``edt_sq_*`` compute the exact squared Euclidean distance transform
  (per-column 1D sweep followed by a row-wise parabola lower envelope).

Every pair is exactly equivalent: the winner of a pixel is the lexicographic
minimum of (depth, point index) over all points whose splat footprint covers
it, and the distance transform is integer-exact, so numba and numpy paths
produce identical bits. ``accel.NUMBA_ENABLED`` selects the default alias.
"""

from __future__ import annotations

import numpy as np

from .accel import NUMBA_ENABLED, njit

EMPTY_INDEX = -1


# ---------------------------------------------------------------------------
# z-buffer splatting
# ---------------------------------------------------------------------------


@njit(cache=True)
def _splat_zbuffer_jit(px, py, depth, index, radius, depth_buf, index_buf):
    height, width = depth_buf.shape
    n = px.shape[0]
    for k in range(n):
        u0 = px[k]
        v0 = py[k]
        d = depth[k]
        i = index[k]
        for dv in range(-radius, radius + 1):
            v = v0 + dv
            if v < 0 or v >= height:
                continue
            for du in range(-radius, radius + 1):
                u = u0 + du
                if u < 0 or u >= width:
                    continue
                old = depth_buf[v, u]
                if d < old or (d == old and i < index_buf[v, u]):
                    depth_buf[v, u] = d
                    index_buf[v, u] = i


def splat_zbuffer_numba(px, py, depth, index, radius, depth_buf, index_buf):
    _splat_zbuffer_jit(
        np.ascontiguousarray(px, dtype=np.int64),
        np.ascontiguousarray(py, dtype=np.int64),
        np.ascontiguousarray(depth, dtype=np.float64),
        np.ascontiguousarray(index, dtype=np.int64),
        int(radius),
        depth_buf,
        index_buf,
    )


def splat_zbuffer_numpy(px, py, depth, index, radius, depth_buf, index_buf):
    height, width = depth_buf.shape
    px = np.asarray(px, dtype=np.int64)
    py = np.asarray(py, dtype=np.int64)
    depth = np.asarray(depth, dtype=np.float64)
    index = np.asarray(index, dtype=np.int64)
    if px.size == 0:
        return
    offsets = np.arange(-radius, radius + 1, dtype=np.int64)
    du, dv = np.meshgrid(offsets, offsets)
    uu = (px[:, None] + du.ravel()[None, :]).ravel()
    vv = (py[:, None] + dv.ravel()[None, :]).ravel()
    rep = offsets.size * offsets.size
    dd = np.repeat(depth, rep)
    ii = np.repeat(index, rep)
    ok = (uu >= 0) & (uu < width) & (vv >= 0) & (vv < height)
    uu, vv, dd, ii = uu[ok], vv[ok], dd[ok], ii[ok]
    if uu.size == 0:
        return
    flat = vv * width + uu
    # primary key: pixel; then depth; then point index (deterministic ties)
    order = np.lexsort((ii, dd, flat))
    flat, dd, ii = flat[order], dd[order], ii[order]
    first = np.ones(flat.size, dtype=bool)
    first[1:] = flat[1:] != flat[:-1]
    flat, dd, ii = flat[first], dd[first], ii[first]
    cur_d = depth_buf.ravel()[flat]
    cur_i = index_buf.ravel()[flat]
    win = (dd < cur_d) | ((dd == cur_d) & (ii < cur_i))
    depth_buf.ravel()[flat[win]] = dd[win]
    index_buf.ravel()[flat[win]] = ii[win]


# ---------------------------------------------------------------------------
# exact Euclidean distance transform (squared, integer)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _edt_sq_jit(fg):
    height, width = fg.shape
    inf_lin = height + width + 1
    g = np.empty((height, width), dtype=np.int64)
    for j in range(width):
        d = inf_lin
        for i in range(height):
            if fg[i, j] == 0:
                d = 0
            elif d < inf_lin:
                d += 1
            g[i, j] = d
        d = inf_lin
        for i in range(height - 1, -1, -1):
            if fg[i, j] == 0:
                d = 0
            elif d < inf_lin:
                d += 1
            if d < g[i, j]:
                g[i, j] = d

    inf_sq = np.int64(inf_lin) * np.int64(inf_lin)
    out = np.empty((height, width), dtype=np.int64)
    v = np.empty(width, dtype=np.int64)
    z = np.empty(width + 1, dtype=np.float64)
    f = np.empty(width, dtype=np.int64)
    for i in range(height):
        for j in range(width):
            gij = g[i, j]
            f[j] = gij * gij if gij < inf_lin else inf_sq
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, width):
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
            while s <= z[k]:
                k -= 1
                s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
        k = 0
        for j in range(width):
            while z[k + 1] < j:
                k += 1
            dj = j - v[k]
            out[i, j] = dj * dj + f[v[k]]
    return out


def edt_sq_numba(fg):
    return _edt_sq_jit(np.ascontiguousarray(fg, dtype=np.uint8))


def edt_sq_numpy(fg):
    fg = np.asarray(fg, dtype=bool)
    height, width = fg.shape
    inf_lin = height + width + 1
    g = np.full((height, width), inf_lin, dtype=np.int64)
    # downward and upward column sweeps, vectorized across columns
    row = np.full(width, inf_lin, dtype=np.int64)
    for i in range(height):
        row = np.where(fg[i], np.minimum(row + 1, inf_lin), 0)
        g[i] = row
    row = np.full(width, inf_lin, dtype=np.int64)
    for i in range(height - 1, -1, -1):
        row = np.where(fg[i], np.minimum(row + 1, inf_lin), 0)
        np.minimum(g[i], row, out=g[i])

    inf_sq = np.int64(inf_lin) ** 2
    f = np.where(g < inf_lin, g.astype(np.int64) ** 2, inf_sq)
    out = f.copy()
    # exact row pass by shifted-minimum accumulation over all column offsets
    for dj in range(1, width):
        dj2 = np.int64(dj) * np.int64(dj)
        np.minimum(out[:, dj:], f[:, :-dj] + dj2, out=out[:, dj:])
        np.minimum(out[:, :-dj], f[:, dj:] + dj2, out=out[:, :-dj])
    return out


if NUMBA_ENABLED:
    splat_zbuffer = splat_zbuffer_numba
    edt_sq = edt_sq_numba
else:
    splat_zbuffer = splat_zbuffer_numpy
    edt_sq = edt_sq_numpy
