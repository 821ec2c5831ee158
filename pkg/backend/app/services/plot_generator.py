"""Self-contained SVG learning curves with confidence bands."""

import math
from pathlib import Path
from typing import Union

from lxml import etree

from backend.app.models.experiment import CurvePoint
from backend.app.utils.logger import get_logger

logger = get_logger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"
WIDTH, HEIGHT = 720, 440
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 170, 40, 50
TICKS = 5
PALETTE = [
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
]


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _finite(values: list[float]) -> list[float]:
    return [v for v in values if not math.isnan(v) and not math.isinf(v)]


class _Axes:
    """Maps data coordinates into the plot rectangle."""

    def __init__(self, curves: dict[str, list[CurvePoint]]) -> None:
        points = [p for curve in curves.values() for p in curve]
        iterations = [p.iteration for p in points] or [1]
        ys = _finite([v for p in points for v in (p.mean, p.ci_lower, p.ci_upper)]) or [0.0]
        self.x_min, self.x_max = min(iterations), max(iterations)
        if self.x_max == self.x_min:
            self.x_max = self.x_min + 1
        self.y_min, self.y_max = min(ys), max(ys)
        if math.isclose(self.y_min, self.y_max):
            self.y_min -= 1.0
            self.y_max += 1.0
        self.left = MARGIN_LEFT
        self.right = WIDTH - MARGIN_RIGHT
        self.top = MARGIN_TOP
        self.bottom = HEIGHT - MARGIN_BOTTOM

    def x(self, value: float) -> float:
        return self.left + (value - self.x_min) / (self.x_max - self.x_min) * (self.right - self.left)

    def y(self, value: float) -> float:
        return self.bottom - (value - self.y_min) / (self.y_max - self.y_min) * (self.bottom - self.top)


def _element(parent: etree._Element, tag: str, text: str = "", **attrs: str) -> etree._Element:
    node = etree.SubElement(parent, f"{{{SVG_NS}}}{tag}", {k.replace("_", "-"): v for k, v in attrs.items()})
    if text:
        node.text = text
    return node


def _draw_axes(root: etree._Element, axes: _Axes) -> None:
    group = _element(root, "g", stroke="#333333", stroke_width="1")
    _element(group, "line", x1=_fmt(axes.left), y1=_fmt(axes.bottom), x2=_fmt(axes.right), y2=_fmt(axes.bottom))
    _element(group, "line", x1=_fmt(axes.left), y1=_fmt(axes.top), x2=_fmt(axes.left), y2=_fmt(axes.bottom))
    labels = _element(root, "g", font_family="sans-serif", font_size="11", fill="#333333")
    for i in range(TICKS + 1):
        x_value = axes.x_min + (axes.x_max - axes.x_min) * i / TICKS
        y_value = axes.y_min + (axes.y_max - axes.y_min) * i / TICKS
        x, y = axes.x(x_value), axes.y(y_value)
        _element(group, "line", x1=_fmt(x), y1=_fmt(axes.bottom), x2=_fmt(x), y2=_fmt(axes.bottom + 5))
        _element(group, "line", x1=_fmt(axes.left - 5), y1=_fmt(y), x2=_fmt(axes.left), y2=_fmt(y))
        _element(labels, "text", f"{x_value:g}", x=_fmt(x), y=_fmt(axes.bottom + 18), text_anchor="middle")
        _element(labels, "text", f"{y_value:.4g}", x=_fmt(axes.left - 8), y=_fmt(y + 4), text_anchor="end")
    _element(labels, "text", "iteration", x=_fmt((axes.left + axes.right) / 2), y=_fmt(HEIGHT - 12), text_anchor="middle")
    _element(
        labels,
        "text",
        "mean return",
        x="16",
        y=_fmt((axes.top + axes.bottom) / 2),
        text_anchor="middle",
        transform=f"rotate(-90 16 {_fmt((axes.top + axes.bottom) / 2)})",
    )


def _draw_curve(root: etree._Element, axes: _Axes, curve: list[CurvePoint], color: str) -> None:
    banded = [p for p in curve if len(_finite([p.ci_lower, p.ci_upper])) == 2]
    if banded:
        upper = [f"{_fmt(axes.x(p.iteration))},{_fmt(axes.y(p.ci_upper))}" for p in banded]
        lower = [f"{_fmt(axes.x(p.iteration))},{_fmt(axes.y(p.ci_lower))}" for p in reversed(banded)]
        _element(root, "polygon", points=" ".join(upper + lower), fill=color, fill_opacity="0.2", stroke="none")
    line = [f"{_fmt(axes.x(p.iteration))},{_fmt(axes.y(p.mean))}" for p in curve if _finite([p.mean])]
    _element(root, "polyline", points=" ".join(line), fill="none", stroke=color, stroke_width="2")


def _draw_legend(root: etree._Element, names: list[str]) -> None:
    legend = _element(root, "g", font_family="sans-serif", font_size="12", fill="#333333")
    x = WIDTH - MARGIN_RIGHT + 15
    for index, name in enumerate(names):
        y = MARGIN_TOP + 18 * index
        color = PALETTE[index % len(PALETTE)]
        _element(legend, "rect", x=str(x), y=str(y), width="12", height="12", fill=color)
        _element(legend, "text", name, x=str(x + 18), y=str(y + 10))


def build_svg(curves: dict[str, list[CurvePoint]], title: str) -> bytes:
    """Render curves (legend in the given order) to SVG bytes."""
    if not curves or not any(curves.values()):
        raise ValueError("nothing to plot: no curves given")
    axes = _Axes(curves)
    root = etree.Element(
        f"{{{SVG_NS}}}svg",
        nsmap={None: SVG_NS},
        width=str(WIDTH),
        height=str(HEIGHT),
        viewBox=f"0 0 {WIDTH} {HEIGHT}",
    )
    _element(root, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="#ffffff")
    _element(
        root,
        "text",
        title,
        x=_fmt((axes.left + axes.right) / 2),
        y="24",
        text_anchor="middle",
        font_family="sans-serif",
        font_size="15",
    )
    _draw_axes(root, axes)
    for index, curve in enumerate(curves.values()):
        _draw_curve(root, axes, curve, PALETTE[index % len(PALETTE)])
    _draw_legend(root, list(curves))
    return etree.tostring(root, xml_declaration=True, encoding="UTF-8", pretty_print=True)


def emit_svg_plot(curves: dict[str, list[CurvePoint]], path: Union[str, Path], title: str) -> Path:
    """Write one polyline per agent with a translucent CI band, legend and ticks.

    Raises:
        ValueError: If no curves are given
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(build_svg(curves, title))
    logger.info(f"Wrote plot with {len(curves)} curves to {path}")
    return path
