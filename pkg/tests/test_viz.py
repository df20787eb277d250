import xml.etree.ElementTree as ET

import pytest

from _instances import SMALLWORLD_LAYOUT, smallworld
from logiconf.ground import derive
from logiconf.solve import Model, RootPath, SolveConfig, build_problem, enumerate_models, optimize
from logiconf.viz import (
    DETAIL_COLUMNS,
    OVERVIEW_COLUMNS,
    SVG_NS,
    ModelTable,
    assignment_table,
    export_csv,
    grid_layout,
    leg_paths,
    models_from_tables,
    read_layout,
    read_model_tables,
    render_map,
    render_scatter,
    write_model_tables,
)


@pytest.fixture(scope="module")
def models():
    fs = smallworld()
    return list(enumerate_models(build_problem(fs, derive(fs), SolveConfig())))


@pytest.fixture(scope="module")
def best():
    fs = smallworld()
    return optimize(build_problem(fs, derive(fs), SolveConfig()))[0]


def layout():
    return read_layout(str(SMALLWORLD_LAYOUT), smallworld())


def test_overview_row_for_optimum(best):
    overview, details = export_csv([best])
    assert overview.rows == ((0, 20, best.leg_count),)
    assert len(details.rows) == len(best.paths)


def test_empty_export_is_header_only():
    overview, details = export_csv([])
    assert overview.to_csv() == ",".join(OVERVIEW_COLUMNS) + "\r\n"
    assert details.to_csv() == ",".join(DETAIL_COLUMNS) + "\r\n"


def test_root_path_row_has_empty_means(best):
    _, details = export_csv([best])
    root_rows = [r for r in details.rows if r[1] == "p1"]
    assert root_rows == [(0, "p1", "cP", "", "cP", "", 0)]


def test_round_trip_in_memory(models):
    overview, details = export_csv(models)
    text = ModelTable.from_csv(details.to_csv(), DETAIL_COLUMNS)
    assign = ModelTable.from_csv(assignment_table(models).to_csv())
    back = models_from_tables(text, assign)
    assert back == models
    for m, b in zip(models, back):
        assert (m.total_distance, m.leg_count) == (b.total_distance, b.leg_count)
        assert {k: (p.vias, p.means, p.distance) for k, p in m.paths.items()} == \
               {k: (p.vias, p.means, p.distance) for k, p in b.paths.items()}


def test_round_trip_on_disk(models, tmp_path):
    write_model_tables(models, tmp_path)
    overview, back = read_model_tables(tmp_path)
    assert back == models
    assert [int(x) for x in overview.column("totalDistance")] == [m.total_distance for m in models]


def test_round_trip_keeps_double_sourced_lone_root(tmp_path):
    m = Model.build({"r": ("a", "b")}, {("r", "a", "a"): RootPath("r", "a")})
    write_model_tables([m], tmp_path)
    assert read_model_tables(tmp_path)[1] == [m]


def test_from_csv_rejects_wrong_header():
    with pytest.raises(ValueError):
        ModelTable.from_csv("a,b\n1,2\n", OVERVIEW_COLUMNS)
    with pytest.raises(ValueError):
        ModelTable.from_csv("")


def markers(svg):
    return [e for e in ET.fromstring(svg).iter(f"{{{SVG_NS}}}circle")]


def test_scatter_diagonal(models):
    overview, _ = export_csv(models)
    svg = render_scatter(overview, "totalDistance", "totalDistance")
    circles = markers(svg)
    assert len(circles) == len(models)
    cx = [float(c.get("cx")) for c in circles]
    cy = [float(c.get("cy")) for c in circles]
    # y = x in data space is the line cx + cy = const on the canvas
    assert len({round(x + y, 6) for x, y in zip(cx, cy)}) == 1
    assert all(c.get("data-x") == c.get("data-y") for c in circles)
    root = ET.fromstring(svg)
    assert any(e.get("class") == "diagonal" for e in root.iter(f"{{{SVG_NS}}}line"))


def test_scatter_empty_and_other_kpis(models):
    empty = render_scatter(ModelTable(OVERVIEW_COLUMNS), "totalDistance", "totalDistance")
    assert markers(empty) == []
    texts = [e.text for e in ET.fromstring(empty).iter(f"{{{SVG_NS}}}text")]
    assert "totalDistance" in texts
    overview, _ = export_csv(models)
    assert len(markers(render_scatter(overview, "totalDistance", "legCount"))) == len(models)


def test_scatter_unknown_kpi(models):
    overview, _ = export_csv(models)
    with pytest.raises(KeyError, match="cost"):
        render_scatter(overview, "cost", "totalDistance")


def test_scatter_deterministic(models):
    overview, _ = export_csv(models)
    assert render_scatter(overview) == render_scatter(overview)


def test_map_of_optimum(best):
    svg = render_map(best, layout())
    legs = leg_paths(svg)
    assert len(legs) == best.leg_count
    p4 = [(e.get("data-from"), e.get("data-to"), e.get("data-mean")) for e in legs if e.get("data-part") == "p4"]
    assert p4 == [("cP", "bH", "ship"), ("bH", "bP", "truck")]
    root = ET.fromstring(svg)
    groups = {g.get("data-location"): g for g in root.iter(f"{{{SVG_NS}}}g") if g.get("data-location")}
    assert "production" in groups["aP"].get("class")
    assert "warehouse" in groups["aH"].get("class")
    assert any(e.get("fill") == "red" for e in groups["cP"])
    styles = {e.get("data-mean"): (e.get("stroke"), e.get("stroke-dasharray")) for e in legs}
    assert styles["truck"] == ("gold", None)
    assert styles["ship"][0] == "blue" and styles["ship"][1]


def test_map_leg_count_for_every_model(models):
    lay = layout()
    for m in models:
        assert len(leg_paths(render_map(m, lay))) == m.leg_count


def test_map_root_only_model():
    m = Model.build({"p1": ("aP",)}, {("p1", "aP", "aP"): RootPath("p1", "aP")})
    assert leg_paths(render_map(m, layout())) == []


def test_intra_site_leg_is_self_loop():
    from logiconf.ground import INTRA_SITE, RouteCandidate

    path = RouteCandidate("p2", "aP", "aP", (), (INTRA_SITE,), 0)
    m = Model.build({"p1": ("aP",), "p2": ("aP",)}, {("p1", "aP", "aP"): RootPath("p1", "aP"), ("p2", "aP", "aP"): path})
    (leg,) = leg_paths(render_map(m, layout()))
    assert leg.get("d").startswith("M 120 140 C") and leg.get("d").endswith("120 140")


def test_map_missing_coordinate(best):
    lay = layout()
    del lay.coordinates["bH"]
    with pytest.raises(KeyError, match="bH"):
        render_map(best, lay)


def test_grid_layout_and_determinism(best):
    lay = grid_layout(smallworld())
    assert set(lay.coordinates) == smallworld().locations
    assert render_map(best, lay) == render_map(best, grid_layout(smallworld()))


def test_read_layout_errors(tmp_path):
    bad = tmp_path / "l.csv"
    bad.write_text("location,x,y\naP,1,nope\n")
    with pytest.raises(ValueError, match="line 2"):
        read_layout(str(bad))
