import csv
import io

import pytest

from logiconf.bench import CSV_COLUMNS, InstanceParams, generate, generate_instance, run_variants
from logiconf.ground import Variant, derive, ground_stats
from logiconf.kb import FactSet
from logiconf.verify import run_assertions


@pytest.fixture(scope="module")
def default_instance():
    return generate(InstanceParams())


def test_default_counts(default_instance):
    facts, _ = default_instance
    assert len(facts.locations) == 29
    assert len(facts.production_locs) == 13 and len(facts.warehouse_locs) == 16
    assert len(facts.transport_mean_at_site) == 182
    assert len(facts.parts) == 34


def test_default_instance_is_clean_and_a_tree(default_instance):
    facts, _ = default_instance
    assert run_assertions(facts).findings == ()
    children = [p for _, p in facts.production_plan]
    assert len(children) == len(set(children)) == len(facts.parts) - 1
    assert derive(facts).root == "p00"


def test_generation_is_deterministic():
    assert generate_instance(InstanceParams(seed=3)) == generate_instance(InstanceParams(seed=3))
    assert generate_instance(InstanceParams(seed=3)) != generate_instance(InstanceParams(seed=4))


@pytest.mark.parametrize(
    "bad",
    [dict(n_countries=0), dict(route_density=0.0), dict(ship_density=1.5), dict(n_means=3),
     dict(n_countries=40), dict(n_parts=5), dict(n_transport_mean_at_site=10)],
)
def test_parameter_validation(bad):
    with pytest.raises(ValueError):
        generate_instance(InstanceParams(**bad))


def test_small_params_work():
    facts, _ = generate(InstanceParams(n_production_locs=3, n_warehouse_locs=2, n_transport_mean_at_site=14,
                                       n_parts=4, n_countries=2, n_regions=1, n_means=4, seed=1))
    assert len(facts.locations) == 5 and len(facts.transport_mean_at_site) == 14


def test_run_variants_report(default_instance):
    facts, _ = default_instance
    report = run_variants(facts, timeout=30)
    assert [r.variant for r in report.rows] == [v.value for v in Variant]
    base = report.row("Baseline")
    assert base.status == "sat"
    assert report.row(Variant.PL_CHOICE_AS_IC).choice_points == base.choice_points - 13
    assert report.row("PLChoiceAsIC").ground_proxy == base.ground_proxy
    rows = list(csv.reader(io.StringIO(report.to_csv())))
    assert rows[0] == CSV_COLUMNS and len(rows) == 6
    for r in report.rows:
        assert r.status in {"sat", "unsat", "timeout", "infeasible"}
        stats = ground_stats(derive(facts), r.variant)
        assert (r.cbtft, r.direct, r.via1, r.via2, r.ground_proxy) == stats[:5]


def test_run_variants_empty():
    report = run_variants(FactSet(), timeout=5)
    assert len(report.rows) == 5
    for r in report.rows:
        assert (r.cbtft, r.direct, r.via1, r.via2, r.ground_proxy, r.choice_points) == (0,) * 6


def test_timeout_is_recorded(default_instance):
    facts, _ = default_instance
    report = run_variants(facts, timeout=0.0, variants=[Variant.BASELINE])
    assert report.rows[0].status == "timeout" and report.rows[0].first_model_ms is None
