"""Binary portable pixmap (P6) heatmaps with boundary overlays.

Grid cell (eta_i, u_j) becomes a ``scale`` x ``scale`` pixel block. U/t runs
left to right and eta bottom to top. A value v maps to colormap entry
``round(255 * (v - vmin) / (vmax - vmin))`` (clipped to 0..255). Invalid or
non-finite cells are drawn in ``INVALID_RGB``.

The colormap is a fixed 256-entry table, linearly interpolated (in integer
RGB, rounded half up) between the anchor colors in ``ANCHORS``. The table is
built once at import, so rendered bytes do not depend on any plotting library.

Overlay polylines are rasterized with Bresenham's algorithm on the pixel grid.
The real-line gap family is dashed cyan and the imaginary-zero family is
dash-dotted black.
"""

from __future__ import annotations

import re

import numpy as np

from .boundaries import IMAG_ZERO, REAL_GAP

# dark purple -> blue -> teal -> green -> yellow
ANCHORS = np.array([
    (68, 1, 84),
    (59, 82, 139),
    (33, 145, 140),
    (94, 201, 98),
    (253, 231, 37),
], dtype=np.int64)

INVALID_RGB = (128, 128, 128)
OVERLAY_STYLE = {
    REAL_GAP: ((0, 255, 255), (6, 3)),  # dashed
    IMAG_ZERO: ((0, 0, 0), (6, 2, 1, 2)),  # dash-dot
}


def _build_table(anchors: np.ndarray, n: int = 256) -> np.ndarray:
    segs = len(anchors) - 1
    table = np.empty((n, 3), dtype=np.uint8)
    for i in range(n):
        num = i * segs  # position i/(n-1) along the anchors, kept integral
        k = min(num // (n - 1), segs - 1)
        rem = num - k * (n - 1)
        a, b = anchors[k], anchors[k + 1]
        table[i] = (a * (n - 1) + (b - a) * rem + (n - 1) // 2) // (n - 1)
    return table


COLORMAP = _build_table(ANCHORS)


class GridShapeError(ValueError):
    pass


def as_image_grid(etas, us, values, valid=None):
    """Arrange scattered (eta, u, value) rows into a rectangular array.

    Returns (eta_axis, u_axis, array[n_eta, n_u], valid[n_eta, n_u]).
    """
    etas, us = np.asarray(etas, dtype=float), np.asarray(us, dtype=float)
    values = np.asarray(values, dtype=float)
    valid = np.ones(len(values), bool) if valid is None else np.asarray(valid, bool)
    eta_axis, ei = np.unique(etas, return_inverse=True)
    u_axis, ui = np.unique(us, return_inverse=True)
    if len(eta_axis) * len(u_axis) != len(values):
        raise GridShapeError(f"{len(values)} cells do not form a {len(eta_axis)}x{len(u_axis)} grid")
    grid = np.full((len(eta_axis), len(u_axis)), np.nan)
    ok = np.zeros_like(grid, dtype=bool)
    seen = np.zeros_like(ok)
    for e, u, v, f in zip(ei, ui, values, valid):
        if seen[e, u]:
            raise GridShapeError(f"duplicate cell at eta={eta_axis[e]}, u_over_t={u_axis[u]}")
        seen[e, u] = True
        grid[e, u], ok[e, u] = v, f
    return eta_axis, u_axis, grid, ok


def colorize(grid: np.ndarray, valid: np.ndarray, vmin: float, vmax: float) -> np.ndarray:
    """RGB image (rows top to bottom = eta high to low) with one pixel per cell."""
    span = vmax - vmin
    good = valid & np.isfinite(grid)
    frac = np.zeros_like(grid) if span <= 0 else (np.where(good, grid, vmin) - vmin) / span
    idx = np.clip(np.floor(255 * np.clip(frac, 0, 1) + 0.5), 0, 255).astype(np.int64)
    rgb = COLORMAP[idx]
    rgb[~good] = INVALID_RGB
    return rgb[::-1]


def _line(x0, y0, x1, y1):
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx, sy = (1 if x0 < x1 else -1), (1 if y0 < y1 else -1)
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def draw_polylines(img: np.ndarray, polylines, eta_axis, u_axis) -> None:
    """Rasterize boundary polylines in place onto an upscaled image."""
    h, w = img.shape[:2]
    elo, ehi = eta_axis[0], eta_axis[-1]
    ulo, uhi = u_axis[0], u_axis[-1]
    for line in polylines:
        color, dashes = OVERLAY_STYLE[line.family]
        period = sum(dashes)
        on = np.zeros(period, bool)
        pos = 0
        for i, d in enumerate(dashes):
            on[pos:pos + d] = i % 2 == 0
            pos += d
        step = 0
        pts = line.points
        for (e0, u0), (e1, u1) in zip(pts[:-1], pts[1:]):
            if not all(np.isfinite([e0, u0, e1, u1])):
                continue
            # only segments with both ends inside the plotted window
            if not (ulo <= u0 <= uhi and ulo <= u1 <= uhi):
                continue
            px = [int(round((u - ulo) / (uhi - ulo) * (w - 1))) if uhi > ulo else 0 for u in (u0, u1)]
            py = [int(round((ehi - e) / (ehi - elo) * (h - 1))) if ehi > elo else 0 for e in (e0, e1)]
            for x, y in _line(px[0], py[0], px[1], py[1]):
                if on[step % period] and 0 <= x < w and 0 <= y < h:
                    img[y, x] = color
                step += 1


def render(grid, valid, vmin, vmax, scale=8, polylines=(), eta_axis=None, u_axis=None) -> np.ndarray:
    img = colorize(grid, valid, vmin, vmax)
    img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    if polylines and len(eta_axis) and len(u_axis):
        draw_polylines(img, polylines, eta_axis, u_axis)
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def write_ppm(img: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(img))


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", data)
    if not m:
        raise ValueError(f"{path}: not an 8-bit P6 pixmap")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=m.end()).reshape(h, w, 3)
