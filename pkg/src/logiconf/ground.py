"""Derivation of transport feasibility and route candidates.

The rule program is small and fixed, so each rule is evaluated as a set
operation rather than through a general datalog engine. The only recursive
rule (route symmetry) runs semi-naively on its delta, and the only negation
(the root rule) sits in a stratum above the purely extensional plan relation.

Route candidates come in three kinds, by number of intermediate stops:
``direct`` (one leg), ``via1`` (two legs) and ``via2`` (three legs). Their
number under each :class:`Variant` is what :func:`ground_stats` reports; at
benchmark scale the via2 set runs into tens of millions, so the counts are
computed with batched matrix products instead of materializing candidates.
"""
from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple

import numpy as np

from .kb import FactSet, SymbolTable

INTRA_SITE = "intraSite"
SHIP = "ship"

Route = tuple[str, str, str, int]
Leg = tuple[str, str, str, str, int]  # (from, to, part, mean, distance)


class Variant(str, enum.Enum):
    BASELINE = "Baseline"
    PL_CHOICE_AS_IC = "PLChoiceAsIC"
    LOC_TYPE_REQ = "LocTypeReq"
    TM_TYPE_REQ = "TMTypeReq"
    ALL = "All"

    @property
    def loc_type_req(self) -> bool:
        return self in (Variant.LOC_TYPE_REQ, Variant.ALL)

    @property
    def tm_type_req(self) -> bool:
        return self in (Variant.TM_TYPE_REQ, Variant.ALL)

    @property
    def pl_choice_as_ic(self) -> bool:
        return self in (Variant.PL_CHOICE_AS_IC, Variant.ALL)

    @classmethod
    def parse(cls, text: str) -> "Variant":
        for v in cls:
            if text.lower() in (v.value.lower(), v.name.lower()):
                return v
        raise ValueError(f"unknown variant {text!r}; expected one of {[v.value for v in cls]}")


class DerivationError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class RouteCandidate:
    """One way of moving ``part`` from ``src`` to ``dst``.

    ``means[i]`` is the transport mean of leg ``i``; legs chain through
    ``vias``. ``distance`` is the sum of leg distances.
    """

    part: str
    src: str
    dst: str
    vias: tuple[str, ...]
    means: tuple[str, ...]
    distance: int

    @property
    def kind(self) -> str:
        return ("direct", "via1", "via2")[len(self.vias)]

    @property
    def stops(self) -> tuple[str, ...]:
        return (self.src, *self.vias, self.dst)

    def legs(self) -> list[tuple[str, str, str]]:
        s = self.stops
        return [(s[i], s[i + 1], self.means[i]) for i in range(len(self.means))]

    @property
    def sort_key(self):
        return (self.distance, len(self.means), self.vias, self.means)

    def reduced_key(self):
        """Identity of the physical movement: intra-site legs dropped.

        A via candidate padded with zero-distance intra-site legs reduces to
        the same key as the shorter candidate it replicates.
        """
        kept = tuple(leg for leg in self.legs() if leg[2] != INTRA_SITE)
        return (self.part, self.src, self.dst, kept, self.distance)


def dedupe_candidates(cands: Iterable[RouteCandidate]) -> list[RouteCandidate]:
    """Keep one representative (fewest legs, then lexicographic) per reduced key."""
    best: dict = {}
    for c in cands:
        k = c.reduced_key()
        cur = best.get(k)
        if cur is None or (len(c.means), c.vias, c.means) < (len(cur.means), cur.vias, cur.means):
            best[k] = c
    return sorted(best.values(), key=lambda c: c.sort_key)


@dataclass(frozen=True)
class DerivedDB:
    facts: FactSet
    locations: frozenset[str]
    root: str | None
    routes: frozenset[Route]
    mean_at_site: frozenset[tuple[str, str]]
    can_transport: frozenset[tuple[str, str]]
    cbtft: frozenset[Leg]
    ship: str = SHIP


def symmetric_closure(routes: Iterable[Route]) -> frozenset[Route]:
    closed = set(routes)
    delta = set(closed)
    while delta:
        delta = {(t, f, m, d) for f, t, m, d in delta} - closed
        closed |= delta
    return frozenset(closed)


def find_plan_cycle(plan: Iterable[tuple[str, str]]) -> list[str] | None:
    """Return one cycle ``[a, b, ..., a]`` in the super->part graph, if any."""
    succ: dict[str, list[str]] = defaultdict(list)
    for sup, part in sorted(plan):
        succ[sup].append(part)
    WHITE, GREY, BLACK = 0, 1, 2
    color: dict[str, int] = defaultdict(int)
    for start in sorted(succ):
        if color[start]:
            continue
        stack = [(start, iter(succ[start]))]
        path = [start]
        color[start] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
                path.pop()
            elif color[nxt] == GREY:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(succ[nxt])))
                path.append(nxt)
    return None


def find_roots(plan: Iterable[tuple[str, str]]) -> list[str]:
    plan = list(plan)
    children = {p for _, p in plan}
    return sorted({s for s, _ in plan} - children)


def derive_base(facts: FactSet, ship: str = SHIP) -> DerivedDB:
    """Closure of the non-choice rules: locations, root, route symmetry and
    intra-site extension. ``cbtft`` holds only the intra-site seeds; call
    :func:`derive_cbtft` (or :func:`derive`) for the full relation."""
    if INTRA_SITE in facts.transport_means or any(m == INTRA_SITE for _, m in facts.transport_mean_at_site):
        raise DerivationError(f"{INTRA_SITE!r} is reserved and may not appear in the input")
    negative = sorted(r for r in facts.transport_routes if r[3] < 0)
    if negative:
        raise DerivationError(f"negative route distance: {negative[0]}")

    locations = facts.locations
    plan = facts.production_plan
    cycle = find_plan_cycle(plan)
    if cycle:
        raise DerivationError("production plan is cyclic: " + " -> ".join(cycle))
    if plan:
        roots = find_roots(plan)
        if len(roots) != 1:
            raise DerivationError(f"production plan needs exactly one root, found {len(roots)}: {roots}")
        root = roots[0]
    elif len(facts.parts) == 1:
        # a lone part is its own final product
        (root,) = facts.parts
    elif facts.parts:
        raise DerivationError(f"production plan is empty; no root among parts {sorted(facts.parts)}")
    else:
        root = None

    routes = symmetric_closure(facts.transport_routes) | {(x, x, INTRA_SITE, 0) for x in locations}
    return DerivedDB(
        facts=facts,
        locations=locations,
        root=root,
        routes=routes,
        mean_at_site=facts.transport_mean_at_site | {(x, INTRA_SITE) for x in locations},
        can_transport=facts.can_transport | {(INTRA_SITE, p) for p in facts.parts},
        cbtft=frozenset((x, x, p, INTRA_SITE, 0) for x in locations for p in facts.parts),
        ship=ship,
    )


def derive_cbtft(db: DerivedDB) -> frozenset[Leg]:
    """canBeTransportedFromTo: the mean carries the part, is present at both
    ends, and has a route between them."""
    carried: dict[str, list[str]] = defaultdict(list)
    for m, p in db.can_transport:
        carried[m].append(p)
    at_site = db.mean_at_site
    out = set(db.cbtft)
    for f, t, m, d in db.routes:
        if (f, m) in at_site and (t, m) in at_site:
            out.update((f, t, p, m, d) for p in carried.get(m, ()))
    return frozenset(out)


def derive(facts: FactSet, ship: str = SHIP) -> DerivedDB:
    db = derive_base(facts, ship=ship)
    return replace(db, cbtft=derive_cbtft(db))


class Candidates(NamedTuple):
    directs: frozenset[RouteCandidate]
    via1s: frozenset[RouteCandidate]
    via2s: frozenset[RouteCandidate]

    def all(self) -> frozenset[RouteCandidate]:
        return self.directs | self.via1s | self.via2s


def derive_candidates(db: DerivedDB, variant: Variant = Variant.BASELINE) -> Candidates:
    """Materialize every direct/via1/via2 candidate allowed under ``variant``.

    Only for small instances; use :func:`ground_stats` for counts at scale.
    """
    variant = Variant(variant)
    pl, wh = db.facts.production_locs, db.facts.warehouse_locs
    loc_req, tm_req = variant.loc_type_req, variant.tm_type_req
    out: dict[tuple[str, str], list[tuple[str, str, int]]] = defaultdict(list)
    for f, t, p, m, d in db.cbtft:
        out[f, p].append((t, m, d))

    directs = frozenset(RouteCandidate(p, f, t, (), (m,), d) for f, t, p, m, d in db.cbtft)
    via1s, via2s = set(), set()
    for f, v1, p, m1, d1 in db.cbtft:
        if loc_req and (f not in pl or v1 not in wh):
            continue
        for v2, m2, d2 in out[v1, p]:
            if v2 != f and (not loc_req or v2 in pl):
                via1s.add(RouteCandidate(p, f, v2, (v1,), (m1, m2), d1 + d2))
            if v2 == v1 or (loc_req and v2 not in wh) or (tm_req and m2 != db.ship):
                continue
            for t, m3, d3 in out[v2, p]:
                if t != f and (not loc_req or t in pl):
                    via2s.add(RouteCandidate(p, f, t, (v1, v2), (m1, m2, m3), d1 + d2 + d3))
    return Candidates(directs, frozenset(via1s), frozenset(via2s))


def choice_point_count(facts: FactSet, variant: Variant) -> int:
    """Ground choice-rule instances: one assignment choice per part, one
    coverage choice per production location (absent when coverage is
    rewritten as rule + constraint), one path choice per plan-edge grounding
    over produceable sites."""
    n_sites: dict[str, int] = defaultdict(int)
    for p, _ in facts.part_produceable_at:
        n_sites[p] += 1
    total = len(facts.parts)
    if not Variant(variant).pl_choice_as_ic:
        total += len(facts.production_locs)
    total += sum(n_sites[p] * n_sites[s] for s, p in facts.production_plan)
    return total


class GroundStats(NamedTuple):
    cbtft: int
    direct: int
    via1: int
    via2: int
    ground_proxy: int
    choice_points: int


def _leg_tensors(db: DerivedDB, index: SymbolTable, parts: list[str]):
    n = len(index)
    pidx = {p: i for i, p in enumerate(parts)}
    all_legs = np.zeros((len(parts), n, n), dtype=np.int64)
    ship_legs = np.zeros_like(all_legs)
    for f, t, p, m, _ in db.cbtft:
        k, i, j = pidx[p], index.id(f), index.id(t)
        all_legs[k, i, j] += 1
        if m == db.ship:
            ship_legs[k, i, j] += 1
    return all_legs, ship_legs


def _count_chains(first, middle, last, square: bool) -> int:
    """sum over F != T of (first @ middle @ last)[F, T], batched over parts."""
    prod = first if middle is None else first @ middle
    prod = prod @ last
    total = int(prod.sum())
    if square:
        total -= int(np.trace(prod, axis1=1, axis2=2).sum())
    return total


def count_candidates(db: DerivedDB, variant: Variant = Variant.BASELINE) -> tuple[int, int, int]:
    """Exact (direct, via1, via2) counts without materializing candidates.

    Each candidate corresponds to exactly one chain of cbtft legs when every
    (from, to, part, mean) has a single distance; otherwise distinct chains may
    coincide and the count falls back to materialization.
    """
    variant = Variant(variant)
    if len({leg[:4] for leg in db.cbtft}) != len(db.cbtft):
        c = derive_candidates(db, variant)
        return len(c.directs), len(c.via1s), len(c.via2s)
    parts = sorted({leg[2] for leg in db.cbtft})
    if not parts:
        return 0, 0, 0
    locs = sorted(db.locations | {leg[0] for leg in db.cbtft} | {leg[1] for leg in db.cbtft})
    index = SymbolTable(locs)
    A, S = _leg_tensors(db, index, parts)
    mid_src = S if variant.tm_type_req else A
    if variant.loc_type_req:
        pl = [index.id(x) for x in sorted(db.facts.production_locs) if x in index]
        wh = [index.id(x) for x in sorted(db.facts.warehouse_locs) if x in index]
        first = A[:, pl][:, :, wh]
        last = A[:, wh][:, :, pl]
        middle = mid_src[:, wh][:, :, wh]
    else:
        first = last = A
        middle = mid_src.copy()
    idx = np.arange(middle.shape[1])
    middle[:, idx, idx] = 0
    via1 = _count_chains(first, None, last, square=True)
    via2 = _count_chains(first, middle, last, square=True)
    return len(db.cbtft), via1, via2


def ground_stats(db: DerivedDB, variant: Variant = Variant.BASELINE) -> GroundStats:
    """Size of the instantiation under ``variant``.

    ``ground_proxy`` sums the derived relation sizes (locations, closed routes,
    closed mean-at-site, closed canTransport, cbtft) and the candidate counts;
    it approximates a grounder's rule count, not reproduces it.
    """
    variant = Variant(variant)
    direct, via1, via2 = count_candidates(db, variant)
    closure = len(db.locations) + len(db.routes) + len(db.mean_at_site) + len(db.can_transport)
    return GroundStats(
        cbtft=len(db.cbtft),
        direct=direct,
        via1=via1,
        via2=via2,
        ground_proxy=closure + len(db.cbtft) + direct + via1 + via2,
        choice_points=choice_point_count(db.facts, variant),
    )
