"""Static export of models: CSV tables, a KPI scatter plot and route maps.

All documents are SVG built with :mod:`xml.etree.ElementTree`, with fixed
attribute order and number formatting so the same input gives the same bytes.

Three CSV tables describe a list of models:

* overview: ``modelId,totalDistance,legCount``
* details: ``modelId,part,from,viaList,to,meansList,distance`` (lists are
  ``;``-joined; a root path has an empty ``meansList``)
* assignments: ``modelId,part,site``

The assignments table is needed for a lossless round trip, since a
double-sourced root with no sub-parts shows only one of its sites in a path.
"""
from __future__ import annotations

import csv
import io
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Sequence

from .ground import INTRA_SITE, SHIP, RouteCandidate
from .kb import FactSet
from .solve import Model, RootPath

OVERVIEW_COLUMNS = ("modelId", "totalDistance", "legCount")
DETAIL_COLUMNS = ("modelId", "part", "from", "viaList", "to", "meansList", "distance")
ASSIGNMENT_COLUMNS = ("modelId", "part", "site")
KPIS = OVERVIEW_COLUMNS[1:]

SVG_NS = "http://www.w3.org/2000/svg"


@dataclass(frozen=True)
class ModelTable:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...] = ()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, columns: Sequence[str] | None = None) -> "ModelTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None:
            raise ValueError("empty CSV: header row missing")
        if columns is not None and tuple(header) != tuple(columns):
            raise ValueError(f"unexpected CSV header {header}, expected {list(columns)}")
        return cls(tuple(header), tuple(tuple(r) for r in reader if r))

    def column(self, name: str) -> list:
        if name not in self.columns:
            raise KeyError(f"unknown column {name!r}; have {list(self.columns)}")
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def export_csv(models: Sequence[Model]) -> tuple[ModelTable, ModelTable]:
    """Overview and detail tables; model ids are list positions."""
    overview, details = [], []
    for mid, m in enumerate(models):
        overview.append((mid, m.total_distance, m.leg_count))
        for (part, src, dst), path in sorted(m.paths.items()):
            details.append((mid, part, src, ";".join(path.vias), dst, ";".join(path.means), path.distance))
    return ModelTable(OVERVIEW_COLUMNS, tuple(overview)), ModelTable(DETAIL_COLUMNS, tuple(details))


def assignment_table(models: Sequence[Model]) -> ModelTable:
    rows = [(mid, p, s) for mid, m in enumerate(models) for p, sites in m.assignment.items() for s in sites]
    return ModelTable(ASSIGNMENT_COLUMNS, tuple(rows))


def models_from_tables(details: ModelTable, assignments: ModelTable) -> list[Model]:
    """Rebuild models from detail and assignment tables (strings or values)."""
    assign: dict[int, dict[str, list[str]]] = {}
    for mid, part, site in assignments.rows:
        assign.setdefault(int(mid), {}).setdefault(part, []).append(site)
    paths: dict[int, dict] = {}
    for mid, part, src, vias, dst, means, dist in details.rows:
        mid = int(mid)
        assign.setdefault(mid, {})
        if means == "":
            path = RootPath(part, src)
        else:
            path = RouteCandidate(part, src, dst, tuple(vias.split(";")) if vias else (), tuple(means.split(";")), int(dist))
        paths.setdefault(mid, {})[(part, src, dst)] = path
    return [Model.build(assign[mid], paths.get(mid, {})) for mid in sorted(assign)]


def write_model_tables(models: Sequence[Model], out_dir) -> dict[str, str]:
    """Write overview.csv, details.csv and assignments.csv; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    overview, details = export_csv(models)
    out = {}
    for name, table in (("overview", overview), ("details", details), ("assignments", assignment_table(models))):
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(table.to_csv())
        out[name] = path
    return out


def read_model_tables(out_dir) -> tuple[ModelTable, list[Model]]:
    def read(name, cols):
        with open(os.path.join(out_dir, f"{name}.csv"), encoding="utf-8", newline="") as fh:
            return ModelTable.from_csv(fh.read(), cols)

    overview = read("overview", OVERVIEW_COLUMNS)
    models = models_from_tables(read("details", DETAIL_COLUMNS), read("assignments", ASSIGNMENT_COLUMNS))
    return overview, models


# -- svg helpers --------------------------------------------------------------

def _num(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _el(parent, tag, **attrs):
    attrs = {k.rstrip("_").replace("__", ":").replace("_", "-"): (_num(v) if isinstance(v, float) else str(v))
             for k, v in attrs.items()}
    return ET.SubElement(parent, tag, attrs)


def _svg(width: int, height: int, title: str):
    root = ET.Element("svg", {"xmlns": SVG_NS, "width": str(width), "height": str(height),
                              "viewBox": f"0 0 {width} {height}"})
    ET.SubElement(root, "title").text = title
    return root


def _to_bytes(root) -> bytes:
    ET.indent(root)
    return b'<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="utf-8") + b"\n"


# -- scatter -------------------------------------------------------------------

def render_scatter(overview: ModelTable, kpi_x: str = "totalDistance", kpi_y: str = "totalDistance",
                   size: int = 400) -> bytes:
    """One circle per overview row. With ``kpi_x == kpi_y`` both axes share a
    range, so every marker sits on the drawn diagonal."""
    for k in (kpi_x, kpi_y):
        if k not in overview.columns or k == "modelId":
            raise KeyError(f"unknown KPI {k!r}; available: {[c for c in overview.columns if c != 'modelId']}")
    xs = [float(v) for v in overview.column(kpi_x)]
    ys = [float(v) for v in overview.column(kpi_y)]
    ids = overview.column("modelId")

    def span(vals):
        if not vals:
            return 0.0, 1.0
        lo, hi = min(vals), max(vals)
        return (lo - 1, hi + 1) if lo == hi else (lo, hi)

    xr = span(xs)
    yr = xr if kpi_x == kpi_y else span(ys)
    margin, plot = 50, size - 80

    def px(v):
        return margin + (v - xr[0]) / (xr[1] - xr[0]) * plot

    def py(v):
        return margin + plot - (v - yr[0]) / (yr[1] - yr[0]) * plot

    root = _svg(size, size, f"{kpi_y} vs {kpi_x}")
    axes = _el(root, "g", class_="axes", stroke="black")
    _el(axes, "line", x1=float(margin), y1=float(margin + plot), x2=float(margin + plot), y2=float(margin + plot))
    _el(axes, "line", x1=float(margin), y1=float(margin), x2=float(margin), y2=float(margin + plot))
    for v, anchor in ((xr[0], "start"), (xr[1], "end")):
        t = _el(root, "text", x=px(v), y=float(margin + plot + 15), text_anchor=anchor, class_="tick")
        t.text = _num(v)
    for v in yr:
        t = _el(root, "text", x=float(margin - 5), y=py(v), text_anchor="end", class_="tick")
        t.text = _num(v)
    _el(root, "text", x=float(margin + plot / 2), y=float(size - 10), text_anchor="middle", class_="xlabel").text = kpi_x
    _el(root, "text", x=15.0, y=float(margin + plot / 2), text_anchor="middle", class_="ylabel",
        transform=f"rotate(-90 15 {_num(margin + plot / 2)})").text = kpi_y
    if kpi_x == kpi_y:
        _el(root, "line", class_="diagonal", x1=px(xr[0]), y1=py(yr[0]), x2=px(xr[1]), y2=py(yr[1]),
            stroke="grey", stroke_dasharray="4 4")
    marks = _el(root, "g", class_="markers", fill="steelblue")
    for mid, x, y in zip(ids, xs, ys):
        _el(marks, "circle", cx=px(x), cy=py(y), r=4.0, data_model_id=mid, data_x=_num(x), data_y=_num(y))
    return _to_bytes(root)


# -- route map -----------------------------------------------------------------

DEFAULT_STYLES = {
    "truck": ("gold", ""),
    SHIP: ("blue", "8 4"),
    "plane": ("green", "2 4"),
    INTRA_SITE: ("grey", ""),
}
_PALETTE = ("purple", "orange", "brown", "teal", "magenta", "olive", "navy", "maroon")


@dataclass
class MapLayout:
    coordinates: dict[str, tuple[float, float]]
    styling: dict[str, tuple[str, str]] = field(default_factory=lambda: dict(DEFAULT_STYLES))
    kinds: dict[str, str] = field(default_factory=dict)  # location -> production | warehouse

    def style(self, mean: str) -> tuple[str, str]:
        if mean in self.styling:
            return self.styling[mean]
        return _PALETTE[sum(map(ord, mean)) % len(_PALETTE)], "6 2 2 2"

    def point(self, loc: str) -> tuple[float, float]:
        try:
            return self.coordinates[loc]
        except KeyError:
            raise KeyError(f"layout has no coordinate for location {loc!r}") from None


def kinds_of(facts: FactSet) -> dict[str, str]:
    kinds = {x: "warehouse" for x in facts.warehouse_locs}
    kinds.update({x: "production" for x in facts.production_locs})
    return kinds


def grid_layout(facts: FactSet, spacing: float = 120.0) -> MapLayout:
    """Fallback: production locations first, then warehouses, on a square grid."""
    locs = sorted(facts.production_locs) + sorted(facts.warehouse_locs - facts.production_locs)
    cols = max(1, math.ceil(math.sqrt(len(locs))))
    coords = {x: (60 + spacing * (i % cols), 60 + spacing * (i // cols)) for i, x in enumerate(locs)}
    return MapLayout(coords, kinds=kinds_of(facts))


def read_layout(path_or_text, facts: FactSet | None = None) -> MapLayout:
    """Layout CSV with header ``location,x,y``."""
    text = path_or_text
    if "\n" not in str(path_or_text):
        with open(path_or_text, encoding="utf-8", newline="") as fh:
            text = fh.read()
    coords = {}
    for i, row in enumerate(csv.DictReader(io.StringIO(text)), start=2):
        try:
            coords[row["location"]] = (float(row["x"]), float(row["y"]))
        except (KeyError, TypeError, ValueError):
            raise ValueError(f"layout line {i}: expected location,x,y") from None
    return MapLayout(coords, kinds=kinds_of(facts) if facts is not None else {})


def _factory(parent, x, y, name):
    g = _el(parent, "g", class_="location production", data_location=name)
    pts = [(x - 9, y + 7), (x - 9, y - 3), (x - 4, y - 7), (x - 4, y - 3), (x + 1, y - 7), (x + 1, y - 3),
           (x + 6, y - 7), (x + 6, y - 12), (x + 9, y - 12), (x + 9, y + 7)]
    _el(g, "polygon", points=" ".join(f"{_num(a)},{_num(b)}" for a, b in pts), fill="red")
    return g


def _anchor(parent, x, y, name):
    g = _el(parent, "g", class_="location warehouse", data_location=name)
    d = (f"M {_num(x)} {_num(y - 9)} L {_num(x)} {_num(y + 8)} "
         f"M {_num(x - 5)} {_num(y - 5)} L {_num(x + 5)} {_num(y - 5)} "
         f"M {_num(x - 8)} {_num(y + 2)} Q {_num(x - 7)} {_num(y + 9)} {_num(x)} {_num(y + 8)} "
         f"Q {_num(x + 7)} {_num(y + 9)} {_num(x + 8)} {_num(y + 2)}")
    _el(g, "path", d=d, stroke="black", stroke_width=2.0, fill="none")
    return g


def _legs(model: Model) -> list[tuple[str, str, str, str]]:
    out = []
    for path in model.paths.values():
        if isinstance(path, RouteCandidate):
            out += [(path.part, a, b, m) for a, b, m in path.legs()]
    return out


def render_map(model: Model, layout: MapLayout, title: str = "configuration") -> bytes:
    """Location glyphs plus one ``path`` element per leg of every route."""
    legs = _legs(model)
    used = set(layout.coordinates) & ({s for sites in model.assignment.values() for s in sites}
                                      | {x for _, a, b, _ in legs for x in (a, b)})
    for _, a, b, _ in legs:
        layout.point(a), layout.point(b)
    for sites in model.assignment.values():
        for s in sites:
            layout.point(s)

    pts = list(layout.coordinates.values()) or [(0.0, 0.0)]
    width = int(max(x for x, _ in pts) + 80)
    height = int(max(y for _, y in pts) + 80)
    root = _svg(width, height, title)

    routes = _el(root, "g", class_="legs", fill="none")
    seen: dict = {}
    for part, a, b, mean in legs:
        (x1, y1), (x2, y2) = layout.point(a), layout.point(b)
        pair = tuple(sorted((a, b)))
        k = seen.get(pair, 0)
        seen[pair] = k + 1
        color, dash = layout.style(mean)
        attrs = dict(class_="leg", stroke=color, stroke_width=2.0, data_part=part, data_from=a, data_to=b,
                     data_mean=mean)
        if dash:
            attrs["stroke_dasharray"] = dash
        if a == b:
            r = 10.0 + 4 * k
            d = f"M {_num(x1)} {_num(y1)} C {_num(x1 - r)} {_num(y1 - 2.5 * r)} {_num(x1 + r)} {_num(y1 - 2.5 * r)} {_num(x1)} {_num(y1)}"
            lx, ly = x1, y1 - 2 * r
        else:
            # parallel legs between one pair bend apart
            bend = 0.0 if k == 0 else (12.0 * ((k + 1) // 2)) * (1 if k % 2 else -1)
            mx, my = (x1 + x2) / 2, (y1 + y2) / 2
            n = math.hypot(x2 - x1, y2 - y1) or 1.0
            cx, cy = mx - (y2 - y1) / n * bend, my + (x2 - x1) / n * bend
            d = f"M {_num(x1)} {_num(y1)} Q {_num(cx)} {_num(cy)} {_num(x2)} {_num(y2)}"
            lx, ly = (mx + cx) / 2, (my + cy) / 2
        _el(routes, "path", d=d, **attrs)
        _el(routes, "text", x=float(lx), y=float(ly), class_="leg-label", font_size=10, fill=color).text = part

    glyphs = _el(root, "g", class_="locations")
    for loc in sorted(layout.coordinates):
        x, y = layout.coordinates[loc]
        if layout.kinds.get(loc) == "warehouse":
            _anchor(glyphs, x, y, loc)
        else:
            _factory(glyphs, x, y, loc)
        label = _el(glyphs, "text", x=float(x + 12), y=float(y + 4), font_size=11, class_="location-label")
        label.text = loc
        if loc in used:
            label.set("font-weight", "bold")

    sites = _el(root, "g", class_="assignment")
    for part, where in model.assignment.items():
        for s in where:
            _el(sites, "desc", data_part=part, data_site=s)
    return _to_bytes(root)


def write_svg(doc: bytes, path) -> str:
    with open(path, "wb") as fh:
        fh.write(doc)
    return str(path)


def leg_paths(svg: bytes) -> list[ET.Element]:
    """The leg elements of a rendered map (for inspection and tests)."""
    root = ET.fromstring(svg)
    return [e for e in root.iter(f"{{{SVG_NS}}}path") if e.get("class") == "leg"]


__all__ = [
    "ASSIGNMENT_COLUMNS",
    "DETAIL_COLUMNS",
    "MapLayout",
    "ModelTable",
    "OVERVIEW_COLUMNS",
    "assignment_table",
    "export_csv",
    "grid_layout",
    "kinds_of",
    "leg_paths",
    "models_from_tables",
    "read_layout",
    "read_model_tables",
    "render_map",
    "render_scatter",
    "write_model_tables",
    "write_svg",
]
