"""Safe-zone maps: estimators plotted in (power ratio, normalized coupling).

Both map flavors share one coordinate system: x is the power ratio
ev2/ex2 (balance line at x = 1) and y the coupling normalized by the mse
(penalty level at y = 0.5).  The left map reads like an operating-point
chart: green safe band where the ratio stays at or below one, red forbidden
half-plane beyond it.  The right map adds the optimization geometry: the
penalty boundary, the singular corner (1, 0.5) where the two boundaries
meet, and the ideal path along y = 0 that a fitted scale walks, ending at
rho = exz²/(ex2·ez2) when a certified optimum is attached.

render_svg emits plain SVG 1.1 with no randomness, timestamps or external
references; identical datasets yield byte-identical documents.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional
from xml.sax.saxutils import escape

from .diagnostics import BALANCE_TOL, RegimeLabel, classify_powers, classify_regime
from .errors import EmptyInput
from .moments import MomentStats
from .scaling import ScalingCertificate, ScalingProblem
from .textio import dumps_stable, fmt_float

DATASET_CSV_HEADER = ("label", "power_ratio", "coupling_norm", "coupling_raw", "regime")

BALANCE_RATIO = 1.0
PENALTY_LEVEL = 0.5


@dataclass(frozen=True)
class MapPoint:
    """One estimator's position on the map.

    coupling_norm is NaN when the mse is exactly zero (an ideal estimate);
    such points are kept but marked undefined.
    """

    label: str
    power_ratio: float
    coupling_norm: float
    coupling_raw: float
    regime: RegimeLabel

    @property
    def coupling_norm_defined(self) -> bool:
        return not math.isnan(self.coupling_norm)


@dataclass(frozen=True)
class HalfPlane:
    """A region bounded by one axis-aligned inequality."""

    axis: str
    op: str
    bound: float


@dataclass(frozen=True)
class MapGeometry:
    balance_line: float
    penalty_line: float
    singularity: tuple[float, float]
    safe_region: HalfPlane
    forbidden_region: HalfPlane
    ideal_path: tuple[tuple[float, float], tuple[float, float]]


@dataclass(frozen=True)
class MapDataset:
    kind: str
    points: tuple[MapPoint, ...]
    geometry: MapGeometry


@dataclass(frozen=True)
class StyleConfig:
    width: int = 720
    height: int = 540
    margin: float = 64.0
    background: str = "#ffffff"
    safe_fill: str = "#c8e6c9"
    forbidden_fill: str = "#ffcdd2"
    axis_color: str = "#333333"
    balance_color: str = "#2e7d32"
    penalty_color: str = "#8b0000"
    singularity_color: str = "#d32f2f"
    ideal_color: str = "#1565c0"
    point_fill: str = "#263238"
    font_family: str = "sans-serif"
    font_size: float = 12.0


class DatasetFiles(NamedTuple):
    csv: str
    geometry: str


def map_point(label: str, stats: MomentStats, balance_tol: float = BALANCE_TOL) -> MapPoint:
    """Place one finalized estimate on the map."""
    regime = classify_regime(stats, balance_tol)
    norm = stats.coupling / stats.mse if stats.mse > 0.0 else math.nan
    return MapPoint(
        label=label,
        power_ratio=stats.ev2 / stats.ex2,
        coupling_norm=norm,
        coupling_raw=stats.coupling,
        regime=regime,
    )


def map_point_from_certificate(
    label: str,
    problem: ScalingProblem,
    certificate: ScalingCertificate,
    balance_tol: float = BALANCE_TOL,
) -> MapPoint:
    """Place a certified optimum; lands on the y = 0 ideal path."""
    regime = classify_powers(problem.ex2, certificate.power_at_star, balance_tol)
    mse = certificate.mse_at_star
    norm = certificate.orthogonality_residual / mse if mse > 0.0 else math.nan
    return MapPoint(
        label=label,
        power_ratio=certificate.power_at_star / problem.ex2,
        coupling_norm=norm,
        coupling_raw=certificate.orthogonality_residual,
        regime=regime,
    )


def region_of(point: MapPoint, balance_tol: float = BALANCE_TOL) -> str:
    """Region membership under the same tolerance the regimes use."""
    if point.power_ratio > BALANCE_RATIO * (1.0 + balance_tol):
        return "forbidden"
    return "safe"


def _geometry(problem: Optional[ScalingProblem]) -> MapGeometry:
    rho = 1.0
    if problem is not None and problem.ex2 > 0.0 and problem.ez2 > 0.0:
        rho = (problem.exz * problem.exz) / (problem.ex2 * problem.ez2)
    return MapGeometry(
        balance_line=BALANCE_RATIO,
        penalty_line=PENALTY_LEVEL,
        singularity=(BALANCE_RATIO, PENALTY_LEVEL),
        safe_region=HalfPlane(axis="power_ratio", op="<=", bound=BALANCE_RATIO),
        forbidden_region=HalfPlane(axis="power_ratio", op=">", bound=BALANCE_RATIO),
        ideal_path=((0.0, 0.0), (rho, 0.0)),
    )


def build_left_map(points, problem: Optional[ScalingProblem] = None) -> MapDataset:
    """Operating-point chart: safe band versus forbidden half-plane."""
    points = tuple(points)
    if not points:
        raise EmptyInput("a map needs at least one point")
    return MapDataset(kind="left", points=points, geometry=_geometry(problem))


def build_right_map(points, problem: Optional[ScalingProblem] = None) -> MapDataset:
    """Optimization-geometry chart: penalty line, singularity, ideal path."""
    points = tuple(points)
    if not points:
        raise EmptyInput("a map needs at least one point")
    return MapDataset(kind="right", points=points, geometry=_geometry(problem))


def emit_dataset(dataset: MapDataset) -> DatasetFiles:
    """Serialize points as CSV plus a JSON geometry sidecar."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DATASET_CSV_HEADER)
    for p in dataset.points:
        writer.writerow(
            (
                p.label,
                fmt_float(p.power_ratio),
                fmt_float(p.coupling_norm),
                fmt_float(p.coupling_raw),
                p.regime.value,
            )
        )
    geometry = dataset.geometry
    sidecar = {
        "map": dataset.kind,
        "balance_line": {"axis": "power_ratio", "value": geometry.balance_line},
        "penalty_line": {"axis": "coupling_norm", "value": geometry.penalty_line},
        "singularity": [geometry.singularity[0], geometry.singularity[1]],
        "ideal_path": [list(geometry.ideal_path[0]), list(geometry.ideal_path[1])],
        "safe_region": {
            "axis": geometry.safe_region.axis,
            "op": geometry.safe_region.op,
            "bound": geometry.safe_region.bound,
        },
        "forbidden_region": {
            "axis": geometry.forbidden_region.axis,
            "op": geometry.forbidden_region.op,
            "bound": geometry.forbidden_region.bound,
        },
    }
    return DatasetFiles(csv=buf.getvalue(), geometry=dumps_stable(sidecar) + "\n")


def parse_dataset_csv(text: str) -> tuple[MapPoint, ...]:
    """Inverse of emit_dataset's CSV half; exact on 17-digit decimal text."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise ValueError("empty dataset text") from None
    if header != DATASET_CSV_HEADER:
        raise ValueError(f"unexpected dataset header {header!r}")
    points = []
    for row in reader:
        if not row:
            continue
        if len(row) != 5:
            raise ValueError(f"expected 5 columns, got {row!r}")
        points.append(
            MapPoint(
                label=row[0],
                power_ratio=float(row[1]),
                coupling_norm=float(row[2]),
                coupling_raw=float(row[3]),
                regime=RegimeLabel(row[4]),
            )
        )
    return tuple(points)


def _tick_step(span: float) -> float:
    raw = span / 5.0
    magnitude = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * magnitude:
            return mult * magnitude
    return 10.0 * magnitude


def _ticks(lo: float, hi: float) -> list[float]:
    step = _tick_step(hi - lo)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    value = first
    while value <= hi + 1e-9 * (hi - lo):
        ticks.append(0.0 if abs(value) < 1e-12 else value)
        value += step
    return ticks


def _px(v: float) -> str:
    return f"{v:.2f}"


def render_svg(dataset: MapDataset, style: StyleConfig = StyleConfig()) -> str:
    """Render the dataset as a self-contained, deterministic SVG document."""
    geometry = dataset.geometry
    finite_x = [p.power_ratio for p in dataset.points]
    finite_y = [p.coupling_norm for p in dataset.points if p.coupling_norm_defined]
    x_hi = max(1.5, 1.15 * max(finite_x)) if finite_x else 1.5
    y_hi = max(1.0, *(1.15 * y for y in finite_y)) if finite_y else 1.0
    y_lo = min(-0.25, *(1.15 * y for y in finite_y)) if finite_y else -0.25
    x_lo = 0.0

    w, h, m = float(style.width), float(style.height), style.margin

    def sx(v: float) -> float:
        return m + (v - x_lo) / (x_hi - x_lo) * (w - 2.0 * m)

    def sy(v: float) -> float:
        return h - m - (v - y_lo) / (y_hi - y_lo) * (h - 2.0 * m)

    out: list[str] = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{style.width}" '
        f'height="{style.height}" viewBox="0 0 {style.width} {style.height}">'
    )
    title = "Power-regime map" if dataset.kind == "left" else "Scaling-geometry map"
    out.append(f"<title>{escape(title)}</title>")
    out.append(
        f'<rect class="background" x="0" y="0" width="{style.width}" '
        f'height="{style.height}" fill="{style.background}"/>'
    )

    # regions: green safe area, red forbidden half-plane beyond the balance line
    if dataset.kind == "left":
        safe_top, safe_bottom = sy(y_hi), sy(y_lo)
    else:
        # the right map bounds the safe area by the penalty level as well
        safe_top, safe_bottom = sy(PENALTY_LEVEL), sy(0.0)
    out.append(
        f'<rect class="region region-safe" x="{_px(sx(x_lo))}" y="{_px(safe_top)}" '
        f'width="{_px(sx(BALANCE_RATIO) - sx(x_lo))}" height="{_px(safe_bottom - safe_top)}" '
        f'fill="{style.safe_fill}"/>'
    )
    out.append(
        f'<rect class="region region-forbidden" x="{_px(sx(BALANCE_RATIO))}" y="{_px(sy(y_hi))}" '
        f'width="{_px(sx(x_hi) - sx(BALANCE_RATIO))}" height="{_px(sy(y_lo) - sy(y_hi))}" '
        f'fill="{style.forbidden_fill}"/>'
    )

    if dataset.kind == "right":
        (ix0, iy0), (ix1, iy1) = geometry.ideal_path
        out.append(
            f'<line class="path ideal-path" x1="{_px(sx(ix0))}" y1="{_px(sy(iy0))}" '
            f'x2="{_px(sx(ix1))}" y2="{_px(sy(iy1))}" stroke="{style.ideal_color}" '
            f'stroke-width="3"/>'
        )

    out.append(
        f'<line class="boundary balance-line" x1="{_px(sx(geometry.balance_line))}" '
        f'y1="{_px(sy(y_lo))}" x2="{_px(sx(geometry.balance_line))}" y2="{_px(sy(y_hi))}" '
        f'stroke="{style.balance_color}" stroke-width="1.5"/>'
    )
    if dataset.kind == "right":
        out.append(
            f'<line class="boundary penalty-line" x1="{_px(sx(x_lo))}" '
            f'y1="{_px(sy(geometry.penalty_line))}" x2="{_px(sx(x_hi))}" '
            f'y2="{_px(sy(geometry.penalty_line))}" stroke="{style.penalty_color}" '
            f'stroke-width="1.5" stroke-dasharray="6 4"/>'
        )
        px, py = geometry.singularity
        out.append(
            f'<circle class="marker singularity" cx="{_px(sx(px))}" cy="{_px(sy(py))}" '
            f'r="5" fill="{style.singularity_color}"/>'
        )

    # axes with ticks
    out.append(
        f'<line class="axis" x1="{_px(sx(x_lo))}" y1="{_px(sy(y_lo))}" x2="{_px(sx(x_hi))}" '
        f'y2="{_px(sy(y_lo))}" stroke="{style.axis_color}" stroke-width="1"/>'
    )
    out.append(
        f'<line class="axis" x1="{_px(sx(x_lo))}" y1="{_px(sy(y_lo))}" x2="{_px(sx(x_lo))}" '
        f'y2="{_px(sy(y_hi))}" stroke="{style.axis_color}" stroke-width="1"/>'
    )
    font = f'font-family="{style.font_family}" font-size="{style.font_size:g}"'
    for tick in _ticks(x_lo, x_hi):
        out.append(
            f'<line class="tick" x1="{_px(sx(tick))}" y1="{_px(sy(y_lo))}" '
            f'x2="{_px(sx(tick))}" y2="{_px(sy(y_lo) + 5)}" stroke="{style.axis_color}" '
            f'stroke-width="1"/>'
        )
        out.append(
            f'<text class="tick-label" x="{_px(sx(tick))}" y="{_px(sy(y_lo) + 18)}" '
            f'{font} fill="{style.axis_color}" text-anchor="middle">{tick:g}</text>'
        )
    for tick in _ticks(y_lo, y_hi):
        out.append(
            f'<line class="tick" x1="{_px(sx(x_lo) - 5)}" y1="{_px(sy(tick))}" '
            f'x2="{_px(sx(x_lo))}" y2="{_px(sy(tick))}" stroke="{style.axis_color}" '
            f'stroke-width="1"/>'
        )
        out.append(
            f'<text class="tick-label" x="{_px(sx(x_lo) - 8)}" y="{_px(sy(tick) + 4)}" '
            f'{font} fill="{style.axis_color}" text-anchor="end">{tick:g}</text>'
        )
    out.append(
        f'<text class="axis-label" x="{_px((sx(x_lo) + sx(x_hi)) / 2)}" y="{_px(h - 16)}" '
        f'{font} fill="{style.axis_color}" text-anchor="middle">power ratio '
        f"(estimate / signal)</text>"
    )
    out.append(
        f'<text class="axis-label" x="18" y="{_px((sy(y_lo) + sy(y_hi)) / 2)}" {font} '
        f'fill="{style.axis_color}" text-anchor="middle" '
        f'transform="rotate(-90 18 {_px((sy(y_lo) + sy(y_hi)) / 2)})">coupling / mse</text>'
    )
    out.append(
        f'<text class="map-title" x="{_px(w / 2)}" y="{_px(m - 20)}" {font} '
        f'fill="{style.axis_color}" text-anchor="middle" font-weight="bold">'
        f"{escape(title)}</text>"
    )

    for p in dataset.points:
        y = p.coupling_norm if p.coupling_norm_defined else 0.0
        cls = f"point regime-{p.regime.value}"
        if not p.coupling_norm_defined:
            cls += " point-undefined"
            marker = (
                f'<circle class="{cls}" cx="{_px(sx(p.power_ratio))}" cy="{_px(sy(y))}" '
                f'r="4" fill="none" stroke="{style.point_fill}" stroke-width="1.5" '
                f'stroke-dasharray="2 2"/>'
            )
        else:
            marker = (
                f'<circle class="{cls}" cx="{_px(sx(p.power_ratio))}" cy="{_px(sy(y))}" '
                f'r="4" fill="{style.point_fill}"/>'
            )
        out.append(marker)
        out.append(
            f'<text class="point-label" x="{_px(sx(p.power_ratio) + 7)}" '
            f'y="{_px(sy(y) - 7)}" {font} fill="{style.point_fill}">{escape(p.label)}</text>'
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"
