"""Input assertions and the exhaustive reference solver.

Assertions never fail hard: each violation becomes a finding, so one pass over
the facts reports every problem at once. Two of them (``invalidLocatedIn``,
``invalidLocatedInTwoCountries``) are the published ones; the rest are local
additions and carry ``provenance="extension"``.

:func:`brute_force_solve` is a test oracle. It builds candidates through
:func:`logiconf.ground.derive_candidates` and filters raw placement/path
products with :func:`logiconf.solve.check_model`, sharing nothing with the
backtracking search.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from collections import defaultdict
from typing import Callable, NamedTuple

from .ground import dedupe_candidates, derive_candidates, find_plan_cycle, find_roots
from .kb import FactSet
from .solve import Model, Problem, RootPath, check_model


class Finding(NamedTuple):
    assertion: str
    subjects: tuple[str, ...]
    message: str
    provenance: str = "extension"
    severity: str = "error"


class AssertionReport(NamedTuple):
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def errors(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == "error")

    def names(self) -> list[str]:
        return [f.assertion for f in self.findings]

    def to_text(self) -> str:
        if not self.findings:
            return "all assertions pass\n"
        lines = [
            f"{f.severity}: {f.assertion}({','.join(f.subjects)}) [{f.provenance}] {f.message}"
            for f in self.findings
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["assertionName", "subject", "message"])
        for f in self.findings:
            w.writerow([f.assertion, " ".join(f.subjects), f.message])
        return buf.getvalue()


_ASSERTIONS: list[Callable[[FactSet], list[Finding]]] = []


def assertion(fn):
    _ASSERTIONS.append(fn)
    return fn


@assertion
def invalid_located_in(facts: FactSet) -> list[Finding]:
    placed = {loc for loc, _ in facts.located_in}
    return [
        Finding("invalidLocatedIn", (x,), f"location {x} is not located in a country", "published")
        for x in sorted(facts.locations - placed)
    ]


@assertion
def invalid_located_in_two_countries(facts: FactSet) -> list[Finding]:
    countries = defaultdict(set)
    for loc, c in facts.located_in:
        if c in facts.countries:
            countries[loc].add(c)
    return [
        Finding(
            "invalidLocatedInTwoCountries", (x,),
            f"location {x} is located in {len(countries[x])} countries: {', '.join(sorted(countries[x]))}",
            "published",
        )
        for x in sorted(facts.locations)
        if len(countries[x]) > 1
    ]


@assertion
def dangling_route_reference(facts: FactSet) -> list[Finding]:
    out = []
    for f, t, m, d in sorted(facts.transport_routes):
        missing = [x for x in (f, t) if x not in facts.locations]
        if m not in facts.transport_means:
            missing.append(m)
        if missing:
            out.append(Finding("danglingRouteReference", (f, t, m), f"route refers to undeclared {', '.join(missing)}"))
    return out


@assertion
def dangling_mean_at_site(facts: FactSet) -> list[Finding]:
    return [
        Finding("danglingMeanAtSite", (loc, m), f"transportMeanAtSite({loc},{m}) refers to undeclared symbol")
        for loc, m in sorted(facts.transport_mean_at_site)
        if loc not in facts.locations or m not in facts.transport_means
    ]


@assertion
def dangling_can_transport(facts: FactSet) -> list[Finding]:
    return [
        Finding("danglingCanTransport", (m, p), f"canTransport({m},{p}) refers to undeclared symbol")
        for m, p in sorted(facts.can_transport)
        if m not in facts.transport_means or p not in facts.parts
    ]


@assertion
def dangling_produceable_at(facts: FactSet) -> list[Finding]:
    return [
        Finding("danglingProduceableAt", (p, loc), f"partProduceableAt({p},{loc}) needs a part and a production location")
        for p, loc in sorted(facts.part_produceable_at)
        if p not in facts.parts or loc not in facts.production_locs
    ]


@assertion
def dangling_plan_part(facts: FactSet) -> list[Finding]:
    return [
        Finding("danglingPlanPart", (s, p), f"productionPlan({s},{p}) refers to an undeclared part")
        for s, p in sorted(facts.production_plan)
        if s not in facts.parts or p not in facts.parts
    ]


@assertion
def negative_distance(facts: FactSet) -> list[Finding]:
    return [
        Finding("negativeDistance", (f, t, m), f"distance {d} is negative")
        for f, t, m, d in sorted(facts.transport_routes)
        if d < 0
    ]


@assertion
def part_not_produceable(facts: FactSet) -> list[Finding]:
    produceable = {p for p, _ in facts.part_produceable_at}
    return [
        Finding("partNotProduceable", (p,), f"part {p} is produceable nowhere")
        for p in sorted(facts.parts - produceable)
    ]


@assertion
def production_plan_cycle(facts: FactSet) -> list[Finding]:
    cycle = find_plan_cycle(facts.production_plan)
    if not cycle:
        return []
    return [Finding("productionPlanCycle", tuple(cycle[:-1]), "production plan is cyclic: " + " -> ".join(cycle))]


@assertion
def multiple_roots(facts: FactSet) -> list[Finding]:
    roots = find_roots(facts.production_plan)
    if len(roots) <= 1:
        return []
    return [Finding("multipleRoots", tuple(roots), f"{len(roots)} final products: {', '.join(roots)}")]


@assertion
def location_both_types(facts: FactSet) -> list[Finding]:
    return [
        Finding("locationBothTypes", (x,), f"{x} is both a production and a warehouse location")
        for x in sorted(facts.production_locs & facts.warehouse_locs)
    ]


@assertion
def transport_mean_at_no_site(facts: FactSet) -> list[Finding]:
    used = {m for _, m in facts.transport_mean_at_site}
    return [
        Finding("transportMeanAtNoSite", (m,), f"transport mean {m} is available at no site")
        for m in sorted(facts.transport_means - used)
    ]


@assertion
def country_without_location(facts: FactSet) -> list[Finding]:
    used = {c for _, c in facts.located_in}
    return [
        Finding("countryWithoutLocation", (c,), f"country {c} has no location", severity="warning")
        for c in sorted(facts.countries - used)
    ]


ASSERTION_NAMES = [
    "invalidLocatedIn", "invalidLocatedInTwoCountries", "danglingRouteReference", "danglingMeanAtSite",
    "danglingCanTransport", "danglingProduceableAt", "danglingPlanPart", "negativeDistance",
    "partNotProduceable", "productionPlanCycle", "multipleRoots", "locationBothTypes",
    "transportMeanAtNoSite", "countryWithoutLocation",
]


def run_assertions(facts: FactSet) -> AssertionReport:
    """Evaluate every assertion; findings come out grouped per assertion."""
    findings: list[Finding] = []
    for check in _ASSERTIONS:
        findings.extend(check(facts))
    return AssertionReport(tuple(findings))


# -- exhaustive oracle --------------------------------------------------------

BRUTE_FORCE_LIMIT = 10**7


class InstanceTooLarge(ValueError):
    pass


def brute_force_solve(problem: Problem, limit: int = BRUTE_FORCE_LIMIT) -> tuple[set[Model], int | None]:
    """All models by exhaustive product, and their minimum distance (``None``
    when there are none)."""
    facts, k = problem.facts, problem.k
    sites = defaultdict(list)
    for p, loc in facts.part_produceable_at:
        sites[p].append(loc)
    parts = sorted(facts.parts)
    placements = [list(itertools.combinations(sorted(sites[p]), k)) for p in parts]

    cands = derive_candidates(problem.db, problem.variant).all()
    pool = defaultdict(list)
    for c in cands:
        pool[c.part, c.src, c.dst].append(c)
    if not problem.config.strict_paper_duplicates:
        pool = defaultdict(list, {key: dedupe_candidates(v) for key, v in pool.items()})

    def path_space(assign):
        keys = sorted({
            (p, f, t)
            for s, p in facts.production_plan
            if p in assign and s in assign
            for f in assign[p]
            for t in assign[s]
        })
        spaces = [[(key, c) for c in pool[key]] for key in keys]
        root = problem.db.root
        if root in assign:
            spaces.insert(0, [((root, at, at), RootPath(root, at)) for at in assign[root]])
        return spaces

    total = 0
    for combo in itertools.product(*placements):
        assign = dict(zip(parts, combo))
        total += math.prod(len(s) for s in path_space(assign))
        if total > limit:
            raise InstanceTooLarge(f"more than {limit} placement/path combinations")

    models: set[Model] = set()
    for combo in itertools.product(*placements):
        assign = dict(zip(parts, combo))
        for choice in itertools.product(*path_space(assign)):
            m = Model.build(assign, dict(choice))
            if not check_model(problem, m):
                models.add(m)
    optimum = min((m.total_distance for m in models), default=None)
    return models, optimum


__all__ = [
    "ASSERTION_NAMES",
    "AssertionReport",
    "Finding",
    "InstanceTooLarge",
    "brute_force_solve",
    "run_assertions",
]
