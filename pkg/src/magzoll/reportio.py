"""Deterministic report writers: JSON, CSV tables, and SVG polylines.

Identical inputs produce byte-identical files (sorted keys, fixed float
formatting, no timestamps).
"""

from __future__ import annotations

import json
import math
import os


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if hasattr(obj, "item") and callable(obj.item) and not isinstance(obj, (str, bytes)):
        try:
            return _sanitize(obj.item())
        except (TypeError, ValueError):
            pass
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_sanitize(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def format_cell(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(v) for v in row) + "\n")


def write_svg_polylines(path, polylines, width=640, height=640, margin=20):
    """Plot chart polylines (lists of (N, 2) arrays) into a standalone SVG."""
    xs = [p[0] for poly in polylines for p in poly]
    ys = [p[1] for poly in polylines for p in poly]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1e-12)
    scale = (min(width, height) - 2 * margin) / span

    def tx(p):
        return (margin + (p[0] - x0) * scale,
                height - margin - (p[1] - y0) * scale)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    for i, poly in enumerate(polylines):
        pts = " ".join(f"{u:.3f},{v:.3f}" for u, v in (tx(p) for p in poly))
        col = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" '
                     f'stroke-width="1.2"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def ensure_outdir(path):
    os.makedirs(path, exist_ok=True)
    return path
