"""Self-contained SVG 1.1 graphics: gridded contour maps and x-y curves.

No plotting library; documents are built directly as text.  Contour lines
come from a marching-squares pass over the rectangular grid.  Angle axes
are labeled in units of pi.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .reports import GridData, read_grid_csv

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 72, 24, 34, 56

# dark-blue -> teal -> yellow color stops
_STOPS = (
    (0.267, 0.005, 0.329), (0.283, 0.141, 0.458), (0.254, 0.265, 0.530),
    (0.207, 0.372, 0.553), (0.164, 0.471, 0.558), (0.128, 0.567, 0.551),
    (0.135, 0.659, 0.518), (0.267, 0.749, 0.441), (0.478, 0.821, 0.318),
    (0.741, 0.873, 0.150), (0.993, 0.906, 0.144),
)


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    x = t * (len(_STOPS) - 1)
    i = min(int(x), len(_STOPS) - 2)
    f = x - i
    rgb = [(1 - f) * a + f * b for a, b in zip(_STOPS[i], _STOPS[i + 1])]
    return "#%02x%02x%02x" % tuple(int(round(255 * c)) for c in rgb)


def contour_segments(xs, ys, z, level):
    """Marching-squares line segments of the iso-line ``z = level``.

    ``z`` has shape (len(ys), len(xs)); cells with NaN corners are skipped.
    Returns a list of ((x1, y1), (x2, y2)) pairs in data coordinates.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.shape != (ys.size, xs.size):
        raise ValueError(f"z shape {z.shape} does not match grid "
                         f"({ys.size}, {xs.size})")
    segments = []
    for i in range(ys.size - 1):
        for j in range(xs.size - 1):
            v00, v10 = z[i, j], z[i, j + 1]
            v01, v11 = z[i + 1, j], z[i + 1, j + 1]
            corners = (v00, v10, v11, v01)
            if any(math.isnan(v) for v in corners):
                continue
            case = sum(1 << k for k, v in enumerate(corners) if v > level)
            if case in (0, 15):
                continue

            def lerp(va, vb, pa, pb):
                t = 0.5 if vb == va else (level - va) / (vb - va)
                return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))

            p00, p10 = (xs[j], ys[i]), (xs[j + 1], ys[i])
            p01, p11 = (xs[j], ys[i + 1]), (xs[j + 1], ys[i + 1])
            edge = {
                0: lambda: lerp(v00, v10, p00, p10),   # bottom
                1: lambda: lerp(v10, v11, p10, p11),   # right
                2: lambda: lerp(v01, v11, p01, p11),   # top
                3: lambda: lerp(v00, v01, p00, p01),   # left
            }
            pairs = _MS_CASES[case]
            if case in (5, 10):
                center_high = (v00 + v10 + v01 + v11) / 4.0 > level
                pairs = _MS_SADDLE[(case, center_high)]
            for ea, eb in pairs:
                segments.append((edge[ea](), edge[eb]()))
    return segments


_MS_CASES = {
    1: ((3, 0),), 14: ((3, 0),),
    2: ((0, 1),), 13: ((0, 1),),
    3: ((3, 1),), 12: ((3, 1),),
    4: ((1, 2),), 11: ((1, 2),),
    6: ((0, 2),), 9: ((0, 2),),
    7: ((3, 2),), 8: ((3, 2),),
    5: None, 10: None,
}
_MS_SADDLE = {
    (5, True): ((3, 2), (0, 1)),
    (5, False): ((3, 0), (1, 2)),
    (10, True): ((0, 1), (3, 2)),
    (10, False): ((3, 0), (1, 2)),
}


def _ticks(lo: float, hi: float, n: int = 5):
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _pi_label(value: float) -> str:
    return f"{value / math.pi:.3g}"


class _Canvas:
    def __init__(self, width: int, height: int, title: str):
        self.width, self.height = width, height
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n'
            f'<title>{escape(title)}</title>\n'
        ]

    def add(self, fragment: str) -> None:
        self.parts.append(fragment)

    def text(self, x, y, content, *, size=12, anchor="middle", rotate=None):
        transform = f' transform="rotate(-90 {x:.1f} {y:.1f})"' if rotate else ""
        self.add(f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" '
                 f'font-family="sans-serif" text-anchor="{anchor}"{transform}>'
                 f'{escape(content)}</text>\n')

    def save(self, path: str | Path) -> None:
        self.parts.append("</svg>\n")
        Path(path).write_text("".join(self.parts), encoding="utf-8")


def render_contour(grid: GridData | str | Path, field: str, out_path: str | Path,
                   *, levels: int = 9, width: int = 660, height: int = 540) -> None:
    """Render one grid field over (phi_C, phi_A) with iso-lines and a cross
    at the three-path intensity argmax.

    ``grid`` may be a GridData or a grid CSV path.  Constant fields render
    as a single flat color with no contour lines.  Each iso-line path
    carries a ``data-level`` attribute for machine inspection.
    """
    if not isinstance(grid, GridData):
        grid = read_grid_csv(grid)
    z = grid.field(field)                     # [i_a, j_c]
    xs, ys = np.asarray(grid.phi_c), np.asarray(grid.phi_a)

    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B
    x_lo, x_hi = float(xs[0]), float(xs[-1])
    y_lo, y_hi = float(ys[0]), float(ys[-1])

    def sx(x):
        return _MARGIN_L + (0.5 if x_hi == x_lo else (x - x_lo) / (x_hi - x_lo)) * plot_w

    def sy(y):
        return _MARGIN_T + plot_h - (0.5 if y_hi == y_lo else (y - y_lo) / (y_hi - y_lo)) * plot_h

    canvas = _Canvas(width, height, f"{field} over phase space")
    finite = z[np.isfinite(z)]
    v_lo = float(finite.min()) if finite.size else 0.0
    v_hi = float(finite.max()) if finite.size else 1.0

    # filled cells
    canvas.add('<g class="cells" stroke="none">\n')
    for i in range(ys.size):
        for j in range(xs.size):
            if not np.isfinite(z[i, j]):
                continue
            x0 = sx(xs[max(j - 1, 0)] if j > 0 else xs[0])
            x1 = sx(xs[min(j + 1, xs.size - 1)])
            # cell around the grid point: half-way to the neighbors
            left = (sx(xs[j]) + x0) / 2 if j > 0 else sx(xs[j])
            right = (sx(xs[j]) + x1) / 2 if j < xs.size - 1 else sx(xs[j])
            y0 = sy(ys[max(i - 1, 0)] if i > 0 else ys[0])
            y1 = sy(ys[min(i + 1, ys.size - 1)])
            top = (sy(ys[i]) + y1) / 2 if i < ys.size - 1 else sy(ys[i])
            bottom = (sy(ys[i]) + y0) / 2 if i > 0 else sy(ys[i])
            t = 0.5 if v_hi == v_lo else (z[i, j] - v_lo) / (v_hi - v_lo)
            canvas.add(f'<rect x="{left:.2f}" y="{top:.2f}" '
                       f'width="{right - left:.2f}" height="{bottom - top:.2f}" '
                       f'fill="{_color(t)}"/>\n')
    canvas.add('</g>\n')

    # iso-lines
    if v_hi > v_lo:
        level_values = np.linspace(v_lo, v_hi, levels + 2)[1:-1]
        canvas.add('<g class="contours" fill="none" stroke="black" '
                   'stroke-width="0.8" stroke-opacity="0.6">\n')
        for level in level_values:
            segments = contour_segments(xs, ys, z, float(level))
            if not segments:
                continue
            d = "".join(
                f"M {sx(a[0]):.2f} {sy(a[1]):.2f} L {sx(b[0]):.2f} {sy(b[1]):.2f} "
                for a, b in segments
            )
            canvas.add(f'<path data-level="{level!r}" d="{d.strip()}"/>\n')
        canvas.add('</g>\n')

    # cross at the three-path intensity maximum
    intensity = grid.field("r_abc_det_cps")
    if np.isfinite(intensity).any():
        flat = int(np.nanargmax(intensity))
        i_max, j_max = np.unravel_index(flat, intensity.shape)
        cx, cy = sx(xs[j_max]), sy(ys[i_max])
        arm = 7.0
        canvas.add(f'<g class="argmax-cross" stroke="red" stroke-width="1.8">'
                   f'<line x1="{cx - arm:.2f}" y1="{cy:.2f}" x2="{cx + arm:.2f}" y2="{cy:.2f}"/>'
                   f'<line x1="{cx:.2f}" y1="{cy - arm:.2f}" x2="{cx:.2f}" y2="{cy + arm:.2f}"/>'
                   f'</g>\n')

    # frame, ticks, labels
    canvas.add(f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
               f'height="{plot_h}" fill="none" stroke="black"/>\n')
    for xv in _ticks(x_lo, x_hi):
        canvas.text(sx(xv), _MARGIN_T + plot_h + 16, _pi_label(xv), size=11)
    for yv in _ticks(y_lo, y_hi):
        canvas.text(_MARGIN_L - 8, sy(yv) + 4, _pi_label(yv), size=11, anchor="end")
    canvas.text(_MARGIN_L + plot_w / 2, height - 14, "phi_C (units of pi)")
    canvas.text(18, _MARGIN_T + plot_h / 2, "phi_A (units of pi)", rotate=True)
    canvas.text(_MARGIN_L + plot_w / 2, 20, field, size=14)
    canvas.save(out_path)


def render_curve(points: dict[str, list[tuple[float, float]]],
                 out_path: str | Path, *,
                 x_label: str, y_label: str, title: str = "",
                 error_bars: dict[str, list[float]] | None = None,
                 width: int = 660, height: int = 480) -> None:
    """Scatter/line plot of one or more named series on shared axes."""
    all_x = [p[0] for series in points.values() for p in series]
    all_y = [p[1] for series in points.values() for p in series]
    if error_bars:
        for name, errs in error_bars.items():
            for (x, y), e in zip(points[name], errs):
                all_y.extend([y - e, y + e])
    if not all_x:
        raise ValueError("no points to plot")
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad_y = 0.06 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    def sx(x):
        return _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return _MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    palette = ("#205080", "#c03020", "#208040", "#806020")
    canvas = _Canvas(width, height, title or "curve")
    for k, (name, series) in enumerate(points.items()):
        color = palette[k % len(palette)]
        path = " ".join(f"{'M' if i == 0 else 'L'} {sx(x):.2f} {sy(y):.2f}"
                        for i, (x, y) in enumerate(series))
        canvas.add(f'<g class="series" data-name="{escape(name)}" stroke="{color}" '
                   f'fill="{color}">\n')
        canvas.add(f'<path d="{path}" fill="none" stroke-width="1.4"/>\n')
        for x, y in series:
            canvas.add(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3"/>\n')
        if error_bars and name in error_bars:
            for (x, y), e in zip(series, error_bars[name]):
                canvas.add(f'<line x1="{sx(x):.2f}" y1="{sy(y - e):.2f}" '
                           f'x2="{sx(x):.2f}" y2="{sy(y + e):.2f}" stroke-width="1.2"/>\n')
        canvas.add('</g>\n')
        canvas.text(_MARGIN_L + plot_w - 8, _MARGIN_T + 16 + 16 * k, name,
                    anchor="end", size=11)

    canvas.add(f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
               f'height="{plot_h}" fill="none" stroke="black"/>\n')
    for xv in _ticks(x_lo, x_hi):
        canvas.text(sx(xv), _MARGIN_T + plot_h + 16, f"{xv:.4g}", size=11)
    for yv in _ticks(y_lo, y_hi):
        canvas.text(_MARGIN_L - 8, sy(yv) + 4, f"{yv:.4g}", size=11, anchor="end")
    canvas.text(_MARGIN_L + plot_w / 2, height - 14, x_label)
    canvas.text(18, _MARGIN_T + plot_h / 2, y_label, rotate=True)
    if title:
        canvas.text(_MARGIN_L + plot_w / 2, 20, title, size=14)
    canvas.save(out_path)
