"""Synthetic instances at industrial scale and the encoding-variant study.

The generator lays out regions of countries, places production and warehouse
locations, and gives each region its own set of land transport means. Planes
connect production locations across regions, ships connect warehouses (all
warehouses are harbours; nothing else handles ships). Everything is drawn from
one seeded numpy generator, so an instance is a pure function of its params.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .ground import SHIP, DerivationError, Variant, derive, ground_stats
from .kb import FactSet
from .solve import Infeasible, SolveConfig, build_problem, first_model
from .verify import run_assertions

log = logging.getLogger(__name__)

PLANE = "plane"


@dataclass(frozen=True)
class InstanceParams:
    n_production_locs: int = 13
    n_warehouse_locs: int = 16
    n_transport_mean_at_site: int = 182
    n_parts: int = 34
    n_countries: int = 6
    n_regions: int = 3
    n_means: int = 20
    # calibrated once so the default instance has ~30k canBeTransportedFromTo
    route_density: float = 0.86
    ship_density: float = 0.02
    plane_density: float = 0.3
    carry_prob: float = 0.75
    plane_carry_prob: float = 0.5
    max_sites_per_part: int = 3
    seed: int = 0

    def __post_init__(self):
        for name in ("n_production_locs", "n_warehouse_locs", "n_parts", "n_countries", "n_regions", "max_sites_per_part"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("route_density", "ship_density", "plane_density", "carry_prob", "plane_carry_prob"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.n_means < 2 + self.n_regions:
            raise ValueError("n_means must leave at least one regional mean per region")
        if self.n_countries > self.n_production_locs + self.n_warehouse_locs:
            raise ValueError("every country needs a location: n_countries exceeds location count")
        if self.n_parts < self.n_production_locs:
            raise ValueError("single sourcing needs at least one part per production location")


def _draw(params: InstanceParams, sub_seed: int) -> FactSet:
    rng = np.random.default_rng([params.seed, sub_seed])
    n_pl, n_wh = params.n_production_locs, params.n_warehouse_locs
    n_regions = min(params.n_regions, params.n_countries)

    countries = [f"country{i}" for i in range(params.n_countries)]
    region_of_country = {c: i % n_regions for i, c in enumerate(countries)}
    pls = [f"pl{i:02d}" for i in range(n_pl)]
    whs = [f"wh{i:02d}" for i in range(n_wh)]
    locs = pls + whs

    # production and warehouse locations are dealt round-robin over regions so
    # every region mixes both kinds; within a region countries are random but
    # each country gets at least one location
    region_of = {}
    for group in (pls, whs):
        start = int(rng.integers(n_regions))
        for i, li in enumerate(rng.permutation(len(group))):
            region_of[group[li]] = (start + i) % n_regions
    country_of = {}
    for r in range(n_regions):
        members = [x for x in locs if region_of[x] == r]
        cs = [c for c in countries if region_of_country[c] == r]
        for rank, li in enumerate(rng.permutation(len(members))):
            c = cs[rank] if rank < len(cs) else cs[rng.integers(len(cs))]
            country_of[members[li]] = c

    angles = 2 * np.pi * np.arange(n_regions) / n_regions
    centers = np.stack([np.cos(angles), np.sin(angles)], axis=1) * 1000.0
    coords = {x: centers[region_of[x]] + rng.normal(0.0, 150.0, size=2) for x in locs}

    def dist(a, b, factor):
        return max(1, int(round(float(np.hypot(*(coords[a] - coords[b]))) * factor / 10)))

    regional = [[] for _ in range(n_regions)]
    for i in range(params.n_means - 2):
        regional[i % n_regions].append(f"r{i % n_regions}m{i // n_regions}")
    means = [SHIP, PLANE] + [m for ms in regional for m in ms]

    tmas = {(x, SHIP) for x in whs} | {(x, PLANE) for x in pls}
    need = params.n_transport_mean_at_site - len(tmas)
    slots = [(x, m) for x in locs for m in regional[region_of[x]]]
    if need < 0 or need > len(slots):
        raise ValueError(
            f"n_transport_mean_at_site={params.n_transport_mean_at_site} outside the feasible "
            f"range [{len(tmas)}, {len(tmas) + len(slots)}]"
        )
    # each regional mean first gets two sites in its region, when there are two
    chosen: list[tuple[str, str]] = []
    for r, ms in enumerate(regional):
        members = [x for x in locs if region_of[x] == r]
        for m in ms:
            if need - len(chosen) < 2 or not members:
                break
            picks = rng.choice(len(members), size=min(2, len(members)), replace=False)
            chosen += [(members[i], m) for i in sorted(picks) if (members[i], m) not in chosen]
    rest = [s for s in slots if s not in set(chosen)]
    extra = rng.choice(len(rest), size=need - len(chosen), replace=False)
    tmas |= set(chosen) | {rest[i] for i in sorted(extra)}

    parts = [f"p{i:02d}" for i in range(params.n_parts)]
    plan = {(parts[int(rng.integers(i))], parts[i]) for i in range(1, len(parts))}

    can_transport = {(SHIP, p) for p in parts}
    for p in parts:
        if rng.random() < params.plane_carry_prob:
            can_transport.add((PLANE, p))
        for ms in regional:
            for m in ms:
                if rng.random() < params.carry_prob:
                    can_transport.add((m, p))

    sites_of_mean: dict[str, list[str]] = {m: [] for m in means}
    for x, m in sorted(tmas):
        sites_of_mean[m].append(x)
    routes = set()
    for m in means:
        if m == SHIP:
            density, factor = params.ship_density, 1.3
        elif m == PLANE:
            density, factor = params.plane_density, 0.8
        else:
            density, factor = params.route_density, 1.0 + 0.1 * (int(m.split("m")[-1]) % 4)
        sites = sites_of_mean[m]
        for i, a in enumerate(sites):
            for b in sites[i + 1:]:
                if rng.random() < density:
                    routes.add((a, b, m, dist(a, b, factor)))

    produceable = set()
    cover = rng.permutation(len(parts))[: len(pls)]
    for pl, pi in zip(pls, cover):
        produceable.add((parts[pi], pl))
    for p in parts:
        k = int(rng.integers(1, params.max_sites_per_part + 1))
        for i in rng.choice(len(pls), size=min(k, len(pls)), replace=False):
            if sum(1 for q, _ in produceable if q == p) >= params.max_sites_per_part:
                break
            produceable.add((p, pls[i]))

    return FactSet(
        countries=countries,
        production_locs=pls,
        warehouse_locs=whs,
        located_in=country_of.items(),
        transport_means=means,
        transport_mean_at_site=tmas,
        parts=parts,
        can_transport=can_transport,
        part_produceable_at=produceable,
        transport_routes=routes,
        production_plan=plan,
    )


def _solvable(facts: FactSet, budget: float = 20.0) -> bool:
    try:
        problem = build_problem(facts, derive(facts), SolveConfig())
        return first_model(problem, deadline=time.monotonic() + budget) is not None
    except (Infeasible, DerivationError, TimeoutError):
        return False


def generate(params: InstanceParams = InstanceParams(), max_retries: int = 50) -> tuple[FactSet, int]:
    """Instance plus the number of sub-seed retries it took to get an
    assertion-clean, single-sourcing-solvable one."""
    for sub_seed in range(max_retries + 1):
        facts = _draw(params, sub_seed)
        report = run_assertions(facts)
        if report.findings:
            log.debug("seed %s/%s: %d findings, retrying", params.seed, sub_seed, len(report.findings))
            continue
        if _solvable(facts):
            if sub_seed:
                log.info("seed %s: solvable after %d retries", params.seed, sub_seed)
            return facts, sub_seed
    raise RuntimeError(f"no solvable instance for {params} within {max_retries} retries")


def generate_instance(params: InstanceParams = InstanceParams()) -> FactSet:
    return generate(params)[0]


# -- variant study -------------------------------------------------------------

@dataclass(frozen=True)
class VariantRow:
    variant: str
    cbtft: int
    direct: int
    via1: int
    via2: int
    ground_proxy: int
    choice_points: int
    derive_ms: float
    first_model_ms: float | None
    status: str


CSV_COLUMNS = ["seed", "variant", "cbtft", "direct", "via1", "via2", "groundProxy",
               "choicePoints", "deriveMs", "firstModelMs", "status"]


@dataclass(frozen=True)
class VariantReport:
    rows: tuple[VariantRow, ...]
    seed: int = 0

    def row(self, variant) -> VariantRow:
        variant = Variant(variant).value
        return next(r for r in self.rows if r.variant == variant)

    def csv_rows(self) -> list[list]:
        out = []
        for r in self.rows:
            fm = "" if r.first_model_ms is None else f"{r.first_model_ms:.3f}"
            out.append([self.seed, r.variant, r.cbtft, r.direct, r.via1, r.via2, r.ground_proxy,
                        r.choice_points, f"{r.derive_ms:.3f}", fm, r.status])
        return out

    def to_csv(self, header: bool = True) -> str:
        return reports_to_csv([self], header=header)


def reports_to_csv(reports, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for rep in reports:
        w.writerows(rep.csv_rows())
    return buf.getvalue()


def run_variants(facts: FactSet, config: SolveConfig = SolveConfig(), timeout: float | None = 60.0,
                 seed: int = 0, variants=tuple(Variant)) -> VariantReport:
    """Derive, count and time every encoding variant on one instance.

    A variant whose first-model search exceeds ``timeout`` seconds is recorded
    with status ``timeout``; the remaining variants still run.
    """
    rows = []
    for v in variants:
        v = Variant(v)
        t0 = time.perf_counter()
        db = derive(facts)
        stats = ground_stats(db, v)
        derive_ms = (time.perf_counter() - t0) * 1000

        cfg = replace(config, variant=v)
        t1 = time.perf_counter()
        first_ms = None
        try:
            problem = build_problem(facts, db, cfg)
            deadline = None if timeout is None else time.monotonic() + timeout
            model = first_model(problem, deadline=deadline)
            first_ms = (time.perf_counter() - t1) * 1000
            status = "sat" if model is not None else "unsat"
        except Infeasible:
            status = "infeasible"
        except TimeoutError:
            status = "timeout"
        rows.append(VariantRow(v.value, stats.cbtft, stats.direct, stats.via1, stats.via2,
                               stats.ground_proxy, stats.choice_points, derive_ms, first_ms, status))
        log.info("variant %s: proxy=%d choice=%d derive=%.1fms status=%s",
                 v.value, stats.ground_proxy, stats.choice_points, derive_ms, status)
    return VariantReport(tuple(rows), seed=seed)


def params_dict(params: InstanceParams) -> dict:
    return asdict(params)
