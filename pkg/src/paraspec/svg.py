"""Minimal line-plot SVG writer (CSV outputs are authoritative; plots are cosmetic)."""
import math

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = 60


def _fmt(v):
    return f"{v:.4g}"


def line_plot(x, ys, title, xlabel, ylabel, labels=None, logx=False, logy=False):
    """Return SVG text with one polyline per series in ``ys``."""
    x = np.asarray(x, float)
    ys = [np.asarray(y, float) for y in ys]
    mask = np.isfinite(x)
    if logx:
        mask &= x > 0
    for y in ys:
        mask &= np.isfinite(y)
        if logy:
            mask &= y > 0
    tx = np.log10(x[mask]) if logx else x[mask]
    tys = [np.log10(y[mask]) if logy else y[mask] for y in ys]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" '
           f'font-size="15">{title}</text>']
    if tx.size == 0:
        out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT / 2}" text-anchor="middle" font-family="sans-serif">'
                   'no plottable data</text></svg>')
        return "\n".join(out)
    x0, x1 = float(tx.min()), float(tx.max())
    allv = np.concatenate(tys)
    y0, y1 = float(allv.min()), float(allv.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y0 + 0.5
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(v):
        return MARGIN + (v - x0) / (x1 - x0) * pw

    def py(v):
        return HEIGHT - MARGIN - (v - y0) / (y1 - y0) * ph

    out.append(f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        lx = 10 ** fx if logx else fx
        ly = 10 ** fy if logy else fy
        out.append(f'<text x="{px(fx):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_fmt(lx)}</text>')
        out.append(f'<text x="{MARGIN - 6}" y="{py(fy) + 4:.1f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{_fmt(ly)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 14}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">{xlabel}</text>')
    out.append(f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {HEIGHT / 2})">{ylabel}</text>')
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    # thin long series so files stay small
    step = max(1, math.ceil(tx.size / 2000))
    for i, ty in enumerate(tys):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(tx[::step], ty[::step]))
        out.append(f'<polyline fill="none" stroke="{colors[i % len(colors)]}" stroke-width="1.2" points="{pts}"/>')
        if labels:
            out.append(f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 16 + 14 * i}" text-anchor="end" '
                       f'font-family="sans-serif" font-size="11" fill="{colors[i % len(colors)]}">'
                       f'{labels[i]}</text>')
    out.append("</svg>")
    return "\n".join(out)
