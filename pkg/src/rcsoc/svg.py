"""Minimal deterministic SVG rendering for sweep outputs.

The render layer reads the CSV files back in and never touches the
solvers, so plots are a pure function of the data files; a provenance
comment with the data digest is embedded in every figure.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

_VIRIDIS = [(0.267, 0.005, 0.329), (0.283, 0.141, 0.458),
            (0.254, 0.265, 0.530), (0.207, 0.372, 0.553),
            (0.164, 0.471, 0.558), (0.128, 0.567, 0.551),
            (0.135, 0.659, 0.518), (0.267, 0.749, 0.441),
            (0.478, 0.821, 0.318), (0.741, 0.873, 0.150),
            (0.993, 0.906, 0.144)]

_LABEL_STYLE = {"DW-SW": "#f28e2b", "PW-SS": "#4e79a7",
                "DW-SS": "#59a14f", "UNSTABLE": "#e15759",
                "UNCONVERGED": "#bab0ab"}


def _color(x: float) -> str:
    x = min(max(x, 0.0), 1.0) * (len(_VIRIDIS) - 1)
    i = min(int(x), len(_VIRIDIS) - 2)
    t = x - i
    rgb = [(1 - t) * a + t * b for a, b in zip(_VIRIDIS[i], _VIRIDIS[i + 1])]
    return "#%02x%02x%02x" % tuple(int(255 * v) for v in rgb)


def read_csv(path):
    """Header-keyed columns of a sweep CSV; numbers parsed, rest kept."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    cols = {h: [] for h in header}
    for ln in lines[1:]:
        for h, v in zip(header, ln.split(",")):
            try:
                cols[h].append(float(v))
            except ValueError:
                cols[h].append(v)
    return {h: (np.array(v) if v and isinstance(v[0], float) else v)
            for h, v in cols.items()}, text


def _svg_document(width, height, body, provenance: str) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f"<!-- data: {provenance} -->\n"
            f'<rect width="{width}" height="{height}" fill="white"/>\n'
            + body + "</svg>\n")


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class Frame:
    """Axis-aligned data-to-pixel mapping with simple decorations."""

    def __init__(self, x0, x1, y0, y1, width=640, height=480,
                 margin=56):
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.w, self.h, self.m = width, height, margin

    def px(self, x):
        span = (self.x1 - self.x0) or 1.0
        return self.m + (x - self.x0) / span * (self.w - 2 * self.m)

    def py(self, y):
        span = (self.y1 - self.y0) or 1.0
        return self.h - self.m - (y - self.y0) / span * (self.h - 2 * self.m)

    def decorations(self, xlabel, ylabel, title=""):
        parts = [f'<rect x="{self.m}" y="{self.m}" '
                 f'width="{self.w - 2 * self.m}" '
                 f'height="{self.h - 2 * self.m}" fill="none" '
                 'stroke="black"/>']
        for frac in (0.0, 0.5, 1.0):
            xv = self.x0 + frac * (self.x1 - self.x0)
            yv = self.y0 + frac * (self.y1 - self.y0)
            parts.append(f'<text x="{self.px(xv):.1f}" '
                         f'y="{self.h - self.m + 18}" font-size="11" '
                         f'text-anchor="middle">{xv:.3g}</text>')
            parts.append(f'<text x="{self.m - 6}" y="{self.py(yv):.1f}" '
                         'font-size="11" text-anchor="end">'
                         f"{yv:.3g}</text>")
        parts.append(f'<text x="{self.w / 2:.0f}" y="{self.h - 14}" '
                     f'font-size="13" text-anchor="middle">{xlabel}</text>')
        parts.append(f'<text x="16" y="{self.h / 2:.0f}" font-size="13" '
                     f'text-anchor="middle" transform="rotate(-90 16 '
                     f'{self.h / 2:.0f})">{ylabel}</text>')
        if title:
            parts.append(f'<text x="{self.w / 2:.0f}" y="20" '
                         f'font-size="14" text-anchor="middle">{title}'
                         "</text>")
        return "\n".join(parts) + "\n"


def polyline(frame: Frame, xs, ys, color, dash=None, width=1.5):
    pts = " ".join(f"{frame.px(x):.2f},{frame.py(y):.2f}"
                   for x, y in zip(xs, ys))
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{d}/>\n')


def line_plot(path, series, xlabel, ylabel, title=""):
    """series: list of (name, xs, ys, color, dash)."""
    xs_all = np.concatenate([np.asarray(s[1], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], float) for s in series])
    pad = 0.05 * (np.ptp(ys_all) or 1.0)
    fr = Frame(xs_all.min(), xs_all.max(), ys_all.min() - pad,
               ys_all.max() + pad)
    body = fr.decorations(xlabel, ylabel, title)
    for i, (name, xs, ys, color, dash) in enumerate(series):
        body += polyline(fr, xs, ys, color, dash)
        body += (f'<text x="{fr.w - fr.m - 4}" y="{fr.m + 14 + 14 * i}" '
                 f'font-size="11" text-anchor="end" fill="{color}">'
                 f"{name}</text>\n")
    doc = _svg_document(fr.w, fr.h, body,
                        _digest("".join(s[0] for s in series)
                                + repr(ys_all.tobytes())))
    Path(path).write_text(doc)
    return path


def phase_diagram_svg(csv_path, out_path, color_by="abs_nw_dn",
                      boundaries=None, title=""):
    """Heat map of one column over the (eta, delta) grid with label
    glyph colours and optional boundary overlays."""
    cols, text = read_csv(csv_path)
    etas = np.unique(cols["eta"])
    deltas = np.unique(cols["delta"])
    vals = np.asarray(cols[color_by], float)
    vmax = float(vals.max()) or 1.0
    fr = Frame(etas.min(), etas.max(), deltas.min(), deltas.max())
    de = (etas[1] - etas[0]) if len(etas) > 1 else 1.0
    dd = (deltas[1] - deltas[0]) if len(deltas) > 1 else 1.0
    body = ""
    for i in range(len(vals)):
        x = fr.px(cols["eta"][i] - de / 2)
        y = fr.py(cols["delta"][i] + dd / 2)
        w = abs(fr.px(de) - fr.px(0.0))
        h = abs(fr.py(dd) - fr.py(0.0))
        body += (f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" '
                 f'height="{h:.2f}" fill="{_color(vals[i] / vmax)}"/>\n')
        if cols["label"][i] == "UNSTABLE":
            body += (f'<line x1="{x:.2f}" y1="{y:.2f}" '
                     f'x2="{x + w:.2f}" y2="{y + h:.2f}" stroke="#e15759"'
                     ' stroke-width="1"/>\n')
    if boundaries:
        for b in boundaries:
            pts = sorted(b.points, key=lambda q: (q[1], q[0]))
            color = "#d62728" if b.order == "first" else "#f2d21e"
            dash = None if b.order == "first" else "6,4"
            body += polyline(fr, [q[0] for q in pts], [q[1] for q in pts],
                             color, dash, width=2.5)
    body += fr.decorations("pump strength", "cavity detuning", title)
    Path(out_path).write_text(_svg_document(fr.w, fr.h, body,
                                            _digest(text)))
    return out_path


def cut_plot_svg(csv_path, out_path, title=""):
    cols, text = read_csv(csv_path)
    eta = cols["eta"]
    series = [
        ("|S+|", eta, cols["abs_s_plus"], "#4e79a7", None),
        ("|SW-(-)|", eta, cols["abs_sw_mm"], "#e15759", "6,3"),
        ("|SW-(+)|", eta, cols["abs_sw_mp"], "#e15759", "2,3"),
        ("|alpha_-|", eta, cols["abs_alpha_m"], "#59a14f", None),
        ("winding", eta, np.asarray(cols["winding"], float) * 0.1,
         "#9c755f", "1,2"),
    ]
    return line_plot(out_path, series, "pump strength", "order parameters",
                     title)


def momenta_plot_svg(rows, out_path, title=""):
    """rows: list of (eta, {('dn'|'up', j): abs coeff}) along a cut."""
    etas = [r[0] for r in rows]
    keys = [("dn", 0), ("dn", 1), ("dn", -1), ("dn", 2), ("dn", -2),
            ("dn", 3), ("up", 0), ("up", 1), ("up", -1), ("up", 2),
            ("up", -2), ("up", -3)]
    palette = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
               "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ab",
               "#86bcb6", "#d37295"]
    series = []
    for (comp, j), color in zip(keys, palette):
        ys = [r[1].get((comp, j), 0.0) for r in rows]
        dash = None if comp == "dn" else "5,3"
        series.append((f"|c_{comp},{j}|", etas, ys, color, dash))
    return line_plot(out_path, series, "pump strength",
                     "momentum amplitudes", title)


def spectrum_plot_svg(csv_path, out_path, title=""):
    cols, text = read_csv(csv_path)
    branches = {}
    for i in range(len(cols["eta"])):
        b = int(cols["branch_index"][i])
        branches.setdefault(b, ([], []))
        branches[b][0].append(cols["eta"][i])
        branches[b][1].append(cols["re_omega"][i])
    palette = ["#4e79a7", "#e15759", "#59a14f", "#f28e2b", "#b07aa1"]
    series = [(f"branch {b}", xs, ys, palette[b % len(palette)], None)
              for b, (xs, ys) in sorted(branches.items())]
    return line_plot(out_path, series, "pump strength", "Re(omega)",
                     title)


__all__ = ["read_csv", "line_plot", "phase_diagram_svg", "cut_plot_svg",
           "momenta_plot_svg", "spectrum_plot_svg"]
