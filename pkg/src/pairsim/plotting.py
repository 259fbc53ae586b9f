"""Static SVG rendering of ROC curves.

No plotting dependency: the figure is assembled as text, so identical inputs
produce byte-identical files.  The FAR axis is log-scaled; FAR = 0 cannot be
drawn on a log axis, so zero (and anything below the smallest drawn decade)
clamps to the left edge.
"""

from __future__ import annotations

import math

from .errors import ConfigError, DegenerateInputError

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 640.0, 480.0
_LEFT, _RIGHT, _TOP, _BOTTOM = 70.0, 625.0, 20.0, 430.0


def _validate_curves(curves):
    if not curves:
        raise DegenerateInputError("no ROC curves to plot")
    for name, points in curves:
        if not points:
            raise DegenerateInputError(f"ROC for {name!r} is empty")
        for far, tpr in points:
            if not (0.0 <= far <= 1.0 and 0.0 <= tpr <= 1.0):
                raise ConfigError(f"ROC point ({far}, {tpr}) outside the unit square")


def _far_floor(curves) -> float:
    # smallest positive FAR, rounded down to its decade; wholly-zero curves
    # get a sensible default window
    positives = [
        far for _, points in curves for far, _ in points if far > 0.0
    ]
    if not positives:
        return 1e-3
    return 10.0 ** math.floor(math.log10(min(positives)))


def render_roc_svg(curves) -> str:
    """SVG text for [(name, [(far, tpr), ...]), ...]; legend order = input order."""
    curves = [(str(name), [(float(f), float(t)) for f, t in pts]) for name, pts in curves]
    _validate_curves(curves)
    floor = min(_far_floor(curves), 0.1)
    log_lo = math.log10(floor)

    def x_of(far: float) -> float:
        far = max(far, floor)
        return _LEFT + (math.log10(far) - log_lo) / (0.0 - log_lo) * (_RIGHT - _LEFT)

    def y_of(tpr: float) -> float:
        return _BOTTOM - tpr * (_BOTTOM - _TOP)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W:g}" height="{_H:g}" '
        f'viewBox="0 0 {_W:g} {_H:g}">',
        f'<rect x="0" y="0" width="{_W:g}" height="{_H:g}" fill="white"/>',
        f'<rect x="{_LEFT:.2f}" y="{_TOP:.2f}" width="{_RIGHT - _LEFT:.2f}" '
        f'height="{_BOTTOM - _TOP:.2f}" fill="none" stroke="#333333"/>',
    ]
    # FAR decades along the bottom
    decade = int(round(log_lo))
    for k in range(decade, 1):
        x = x_of(10.0**k)
        label = "1" if k == 0 else f"1e{k}"
        out.append(
            f'<line x1="{x:.2f}" y1="{_BOTTOM:.2f}" x2="{x:.2f}" y2="{_BOTTOM + 6:.2f}" '
            f'stroke="#333333"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{_BOTTOM + 20:.2f}" font-size="12" '
            f'text-anchor="middle">{label}</text>'
        )
    # TPR gridlines every 0.2
    for i in range(6):
        tpr = i / 5.0
        y = y_of(tpr)
        out.append(
            f'<line x1="{_LEFT - 6:.2f}" y1="{y:.2f}" x2="{_LEFT:.2f}" y2="{y:.2f}" '
            f'stroke="#333333"/>'
        )
        out.append(
            f'<text x="{_LEFT - 10:.2f}" y="{y + 4:.2f}" font-size="12" '
            f'text-anchor="end">{tpr:.1f}</text>'
        )
    out.append(
        f'<text x="{(_LEFT + _RIGHT) / 2:.2f}" y="{_BOTTOM + 40:.2f}" font-size="13" '
        f'text-anchor="middle">false accept rate</text>'
    )
    out.append(
        f'<text x="18" y="{(_TOP + _BOTTOM) / 2:.2f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {(_TOP + _BOTTOM) / 2:.2f})">true positive rate</text>'
    )
    for idx, (name, points) in enumerate(curves):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(f"{x_of(f):.2f},{y_of(t):.2f}" for f, t in points)
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'
        )
        ly = _TOP + 18.0 + 18.0 * idx
        out.append(
            f'<line x1="{_RIGHT - 150:.2f}" y1="{ly:.2f}" x2="{_RIGHT - 120:.2f}" '
            f'y2="{ly:.2f}" stroke="{color}" stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{_RIGHT - 114:.2f}" y="{ly + 4:.2f}" font-size="12">{_escape(name)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
