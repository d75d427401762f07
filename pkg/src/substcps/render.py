"""SVG and CSV output.  Output bytes depend only on the inputs."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import SubstCPSError
from .pointset import PatchPointSet, ReturnModule
from .window import WindowApprox

__all__ = ["COLORS", "window_svg", "points_csv", "xi_csv", "cells_csv", "write_text"]

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")

WIDTH = 800
MARGIN = 40


def _color(i: int) -> str:
    return COLORS[i % len(COLORS)]


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".") if x != int(x) else str(int(x))


def _runs(sorted_idx: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of consecutive integers as (start, length)."""
    if len(sorted_idx) == 0:
        return []
    breaks = np.flatnonzero(np.diff(sorted_idx) != 1) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [len(sorted_idx)]])
    return [(int(sorted_idx[s]), int(e - s)) for s, e in zip(starts, ends)]


def window_svg(wa: WindowApprox, title: str = "") -> str:
    """Interval bars for 1-D windows, cell rasters (merged along rows) for 2-D."""
    if wa.dim not in (1, 2):
        raise SubstCPSError(f"cannot draw a {wa.dim}-dimensional window")
    cells = [wa.cells(i) for i in range(len(wa.letters))]
    allc = np.concatenate([c for c in cells if len(c)])
    lo, hi = allc.min(axis=0), allc.max(axis=0) + 1
    span = hi - lo
    out = []
    if wa.dim == 1:
        bar, gap = 24, 16
        scale = (WIDTH - 2 * MARGIN) / float(span[0])
        height = 2 * MARGIN + len(cells) * (bar + gap)
        for i, c in enumerate(cells):
            y = MARGIN + i * (bar + gap)
            out.append(f'<text x="4" y="{y + bar * 0.7:.1f}" font-size="14">{wa.letters[i]}</text>')
            for start, length in _runs(np.sort(c[:, 0])):
                x = MARGIN + (start - lo[0]) * scale
                out.append(
                    f'<rect x="{_fmt(x)}" y="{y}" width="{_fmt(length * scale)}" height="{bar}" '
                    f'fill="{_color(i)}" fill-opacity="0.8"/>'
                )
        # axis with the internal-space coordinates of the ends
        ya = height - MARGIN / 2
        out.append(
            f'<text x="{MARGIN}" y="{ya:.1f}" font-size="11">{_fmt(lo[0] * wa.h)}</text>'
            f'<text x="{WIDTH - MARGIN}" y="{ya:.1f}" font-size="11" text-anchor="end">{_fmt(hi[0] * wa.h)}</text>'
        )
    else:
        scale = (WIDTH - 2 * MARGIN) / float(span.max())
        height = int(2 * MARGIN + span[1] * scale)
        for i, c in enumerate(cells):
            if len(c) == 0:
                continue
            order = np.lexsort((c[:, 0], c[:, 1]))
            c = c[order]
            rows = np.flatnonzero(np.diff(c[:, 1]) != 0) + 1
            parts = [f'<g fill="{_color(i)}" fill-opacity="0.85">']
            for seg in np.split(c, rows):
                yrow = seg[0, 1]
                y = MARGIN + (hi[1] - 1 - yrow) * scale
                for start, length in _runs(seg[:, 0]):
                    x = MARGIN + (start - lo[0]) * scale
                    parts.append(
                        f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(length * scale)}" height="{_fmt(scale)}"/>'
                    )
            parts.append("</g>")
            out.append("".join(parts))
        for i, name in enumerate(wa.letters):
            out.append(
                f'<rect x="{4}" y="{4 + 16 * i}" width="10" height="10" fill="{_color(i)}"/>'
                f'<text x="18" y="{13 + 16 * i}" font-size="12">{name}</text>'
            )
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{int(height)}" '
        f'viewBox="0 0 {WIDTH} {int(height)}">'
    )
    cap = f'<text x="{WIDTH / 2:.0f}" y="16" font-size="13" text-anchor="middle">{title}</text>' if title else ""
    foot = f'<text x="{WIDTH - 4}" y="{int(height) - 4}" font-size="10" text-anchor="end">depth {wa.depth}, {wa.route}</text>'
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', cap, *out, foot, "</svg>"]) + "\n"


def _coeff_str(row) -> str:
    return " ".join(str(int(v)) for v in row)


def points_csv(patch: PatchPointSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["letter", "position_float", "coeff_vector", "den"])
    for k in range(len(patch)):
        w.writerow([patch.letters[patch.labels[k]], repr(float(patch.positions[k])), _coeff_str(patch.coeffs[k]), patch.den])
    return buf.getvalue()


def xi_csv(xi: ReturnModule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value_float", "coeff_vector", "den"])
    for k in range(len(xi)):
        w.writerow([repr(float(xi.values[k])), _coeff_str(xi.coeffs[k]), xi.den])
    return buf.getvalue()


def cells_csv(wa: WindowApprox) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["letter", *[f"k{j}" for j in range(wa.dim)], "depth"])
    for i, name in enumerate(wa.letters):
        for row in wa.cells(i):
            w.writerow([name, *[int(v) for v in row], wa.depth])
    return buf.getvalue()


def write_text(path: str | Path, text: str) -> None:
    if str(path) == "-":
        import sys

        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")
