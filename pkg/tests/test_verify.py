import pytest

from _instances import smallworld
from logiconf.ground import derive
from logiconf.kb import FactSet, parse_fact_file
from logiconf.solve import Problem, SolveConfig
from logiconf.verify import (
    ASSERTION_NAMES,
    InstanceTooLarge,
    brute_force_solve,
    run_assertions,
)


def test_clean_smallworld():
    report = run_assertions(smallworld())
    assert report.findings == () and report.ok
    assert report.to_text() == "all assertions pass\n"


def test_invalid_located_in():
    fs = smallworld()
    fs = fs.replace(located_in={r for r in fs.located_in if r[0] != "aP"})
    report = run_assertions(fs)
    assert [(f.assertion, f.subjects, f.provenance) for f in report.findings] == [
        ("invalidLocatedIn", ("aP",), "published")
    ]


def test_invalid_located_in_two_countries():
    fs = smallworld()
    fs = fs.replace(located_in=fs.located_in | {("aP", "bCountry")})
    report = run_assertions(fs)
    assert [(f.assertion, f.subjects) for f in report.findings] == [("invalidLocatedInTwoCountries", ("aP",))]
    assert "aCountry, bCountry" in report.findings[0].message


def test_findings_never_mutate_and_are_order_independent():
    fs = smallworld().replace(located_in=set())
    before = FactSet(**vars(fs))
    a = run_assertions(fs)
    assert fs == before
    assert run_assertions(FactSet(**{k: list(v)[::-1] for k, v in vars(fs).items()})) == a


EXTENSION_CASES = {
    "danglingRouteReference": lambda fs: fs.replace(transport_routes=fs.transport_routes | {("aP", "zz", "truck", 3)}),
    "danglingMeanAtSite": lambda fs: fs.replace(transport_mean_at_site=fs.transport_mean_at_site | {("aP", "rocket")}),
    "danglingCanTransport": lambda fs: fs.replace(can_transport=fs.can_transport | {("truck", "p9")}),
    "danglingProduceableAt": lambda fs: fs.replace(part_produceable_at=fs.part_produceable_at | {("p1", "aH")}),
    "danglingPlanPart": lambda fs: fs.replace(production_plan=fs.production_plan | {("p4", "p9")}),
    "negativeDistance": lambda fs: fs.replace(transport_routes=fs.transport_routes | {("aP", "bP", "truck", -2)}),
    "partNotProduceable": lambda fs: fs.replace(parts=fs.parts | {"p5"}, production_plan=fs.production_plan | {("p4", "p5")}),
    "productionPlanCycle": lambda fs: fs.replace(production_plan=fs.production_plan | {("p4", "p2")}),
    "multipleRoots": lambda fs: fs.replace(parts=fs.parts | {"q1", "q2"}, production_plan=fs.production_plan | {("q1", "q2")},
                                           part_produceable_at=fs.part_produceable_at | {("q1", "aP"), ("q2", "aP")}),
    "locationBothTypes": lambda fs: fs.replace(warehouse_locs=fs.warehouse_locs | {"aP"}),
    "transportMeanAtNoSite": lambda fs: fs.replace(transport_means=fs.transport_means | {"rocket"}),
    "countryWithoutLocation": lambda fs: fs.replace(countries=fs.countries | {"dCountry"}),
}


@pytest.mark.parametrize("name", sorted(EXTENSION_CASES))
def test_extension_assertions(name):
    report = run_assertions(EXTENSION_CASES[name](smallworld()))
    assert name in report.names()
    hit = [f for f in report.findings if f.assertion == name]
    assert all(f.provenance == "extension" for f in hit)


def test_every_assertion_has_a_case():
    assert set(ASSERTION_NAMES) == set(EXTENSION_CASES) | {"invalidLocatedIn", "invalidLocatedInTwoCountries"}
    assert len(ASSERTION_NAMES) == 14


def test_warning_does_not_fail_report():
    report = run_assertions(EXTENSION_CASES["countryWithoutLocation"](smallworld()))
    assert report.findings and report.ok and not report.errors


def test_report_csv():
    fs = smallworld().replace(located_in=set())
    lines = run_assertions(fs).to_csv().splitlines()
    assert lines[0] == "assertionName,subject,message"
    assert len(lines) == 1 + 5 + 3  # five locations, three countries without one
    assert lines[1].startswith("invalidLocatedIn,aH,")


def test_oracle_single_part():
    fs = parse_fact_file("country(c).\nproductionLoc(a).\nlocatedIn(a,c).\npart(p).\npartProduceableAt(p,a).")
    models, best = brute_force_solve(Problem.from_facts(fs))
    assert len(models) == 1 and best == 0


def test_oracle_unproduceable_part_is_unsat():
    fs = parse_fact_file("country(c).\nproductionLoc(a).\nlocatedIn(a,c).\npart(p).")
    assert brute_force_solve(Problem.from_facts(fs)) == (set(), None)


def test_oracle_refuses_large_instances():
    with pytest.raises(InstanceTooLarge):
        brute_force_solve(Problem(smallworld(), derive(smallworld()), SolveConfig()), limit=10)
