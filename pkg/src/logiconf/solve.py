"""Configuration search: part placement, path choice, distance minimization.

A configuration places every part at one site (single sourcing) or at two
sites in different countries (double sourcing), such that every production
location produces something, and then picks one transport path for every
(part, from, to) combination the production plan requires. The final product
gets a zero-distance root path instead.

The search is explicit backtracking over part placements with two
propagators (location coverage, path availability); path choices are
independent once placements are fixed. :func:`optimize` adds a
branch-and-bound over the same tree.
"""
from __future__ import annotations

import itertools
import random
import time
from collections import defaultdict
from dataclasses import dataclass
from typing import ClassVar, Iterator, Mapping, Union

from .ground import (
    INTRA_SITE,
    DerivedDB,
    RouteCandidate,
    Variant,
    choice_point_count,
    dedupe_candidates,
    derive,
)
from .kb import FactSet

SOURCING = {"single": 1, "double": 2}
MODES = ("enumerate", "optimize")


@dataclass(frozen=True)
class SolveConfig:
    sourcing: str = "single"
    variant: Variant = Variant.BASELINE
    mode: str = "enumerate"
    limit: int | None = None
    seed: int = 0
    strict_paper_duplicates: bool = False

    def __post_init__(self):
        if self.sourcing not in SOURCING:
            raise ValueError(f"sourcing must be one of {list(SOURCING)}, got {self.sourcing!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be >= 1")
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def sites_per_part(self) -> int:
        return SOURCING[self.sourcing]


@dataclass(frozen=True, order=True)
class RootPath:
    """The final product stays where it is assembled."""

    part: str
    at: str

    distance: ClassVar[int] = 0
    means: ClassVar[tuple[str, ...]] = ()
    vias: ClassVar[tuple[str, ...]] = ()

    @property
    def src(self) -> str:
        return self.at

    @property
    def dst(self) -> str:
        return self.at


PathChoice = Union[RouteCandidate, RootPath]
PathKey = tuple[str, str, str]


def _path_sort_key(path: PathChoice):
    return (isinstance(path, RouteCandidate), path.distance, len(path.means), path.vias, path.means)


@dataclass(frozen=True, eq=False)
class Model:
    """One configuration. ``assignment`` maps part -> sorted site tuple."""

    assignment: Mapping[str, tuple[str, ...]]
    paths: Mapping[PathKey, PathChoice]
    total_distance: int
    leg_count: int

    @classmethod
    def build(cls, assignment: Mapping[str, tuple[str, ...]], paths: Mapping[PathKey, PathChoice]) -> "Model":
        assignment = {p: tuple(sorted(s)) for p, s in sorted(assignment.items())}
        paths = dict(sorted(paths.items()))
        return cls(assignment, paths, total_distance(paths.values()), sum(len(p.means) for p in paths.values()))

    @property
    def kpis(self) -> dict[str, int]:
        return {"totalDistance": self.total_distance, "legCount": self.leg_count}

    def key(self):
        return (
            tuple(sorted(self.assignment.items())),
            tuple((k, _path_sort_key(p)) for k, p in sorted(self.paths.items())),
        )

    def __eq__(self, other):
        return isinstance(other, Model) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        placed = ", ".join(f"{p}@{'+'.join(s)}" for p, s in self.assignment.items())
        return f"Model({placed}; distance={self.total_distance})"


def total_distance(paths) -> int:
    """Sum of distances over the *set* of distinct path tuples."""
    return sum(d for d, *_ in {(p.distance, p.part, p.src, p.vias, p.dst, p.means) for p in paths})


class Infeasible(ValueError):
    """The instance cannot have any configuration; names the offending part."""

    def __init__(self, part: str, message: str):
        super().__init__(message)
        self.part = part


class Problem:
    """Facts, derived relations and solver configuration, with per-part site
    domains and lazily generated per-(part, from, to) path domains."""

    def __init__(self, facts: FactSet, db: DerivedDB, config: SolveConfig = SolveConfig()):
        self.facts = facts
        self.db = db
        self.config = config
        self.variant = config.variant
        self.k = config.sites_per_part
        self.parts = sorted(facts.parts)
        self.root = db.root
        self.production_locs = sorted(facts.production_locs)
        self.plan = sorted(facts.production_plan)

        countries: dict[str, set[str]] = defaultdict(set)
        for loc, c in facts.located_in:
            countries[loc].add(c)
        self.countries = {loc: frozenset(c) for loc, c in countries.items()}

        produceable: dict[str, list[str]] = defaultdict(list)
        for p, loc in facts.part_produceable_at:
            produceable[p].append(loc)
        self.produceable = {p: sorted(produceable.get(p, ())) for p in self.parts}

        # infeasible parts keep an empty domain; build_problem rejects them
        self.domains: dict[str, list[tuple[str, ...]]] = {}
        self.infeasibilities: list[Infeasible] = []
        for p in self.parts:
            try:
                self.domains[p] = self._domain(p)
            except Infeasible as exc:
                self.domains[p] = []
                self.infeasibilities.append(exc)

        # legs: (from, part) -> {to: [(mean, distance), ...]}
        legs: dict[tuple[str, str], dict[str, list]] = defaultdict(lambda: defaultdict(list))
        leg_distances: dict[tuple, set[int]] = defaultdict(set)
        for f, t, p, m, d in db.cbtft:
            legs[f, p][t].append((m, d))
            leg_distances[f, t, p, m].add(d)
        self._legs = {k: {t: sorted(v) for t, v in d.items()} for k, d in legs.items()}
        self.leg_distances = {k: frozenset(v) for k, v in leg_distances.items()}
        self._cache: dict[PathKey, tuple[RouteCandidate, ...]] = {}

    @classmethod
    def from_facts(cls, facts: FactSet, config: SolveConfig = SolveConfig()) -> "Problem":
        return cls(facts, derive(facts), config)

    def _domain(self, part: str) -> list[tuple[str, ...]]:
        sites = self.produceable[part]
        if not sites:
            raise Infeasible(part, f"{part} unproduceable: no production site")
        if self.k == 1:
            return [(s,) for s in sites]
        if len(sites) < 2:
            raise Infeasible(part, f"{part} needs 2 production sites for double sourcing, has {len(sites)}")
        pairs = [pair for pair in itertools.combinations(sites, 2) if not self.shared_country(*pair)]
        if not pairs:
            shared = sorted(set().union(*(self.countries.get(s, frozenset()) for s in sites)))
            raise Infeasible(
                part,
                f"country constraint: every site pair of {part} ({', '.join(sites)}) "
                f"lies in the same country ({', '.join(shared)})",
            )
        return pairs

    def shared_country(self, a: str, b: str) -> frozenset[str]:
        return self.countries.get(a, frozenset()) & self.countries.get(b, frozenset())

    def required_keys(self, assignment: Mapping[str, tuple[str, ...]]) -> list[PathKey]:
        keys = {
            (part, f, t)
            for sup, part in self.plan
            if part in assignment and sup in assignment
            for f in assignment[part]
            for t in assignment[sup]
        }
        return sorted(keys)

    def candidates(self, part: str, src: str, dst: str) -> tuple[RouteCandidate, ...]:
        """Path domain for one (part, from, to), sorted by distance."""
        key = (part, src, dst)
        hit = self._cache.get(key)
        if hit is None:
            found = self._generate(part, src, dst)
            if self.config.strict_paper_duplicates:
                hit = tuple(sorted(set(found), key=lambda c: c.sort_key))
            else:
                hit = tuple(dedupe_candidates(found))
            self._cache[key] = hit
        return hit

    def _generate(self, part: str, src: str, dst: str) -> Iterator[RouteCandidate]:
        pl, wh = self.facts.production_locs, self.facts.warehouse_locs
        loc_req, tm_req, ship = self.variant.loc_type_req, self.variant.tm_type_req, self.db.ship
        out = self._legs.get((src, part), {})
        for m, d in out.get(dst, ()):
            yield RouteCandidate(part, src, dst, (), (m,), d)
        if src == dst or (loc_req and (src not in pl or dst not in pl)):
            return
        for v1, first in out.items():
            if loc_req and v1 not in wh:
                continue
            from_v1 = self._legs.get((v1, part), {})
            for m1, d1 in first:
                for m2, d2 in from_v1.get(dst, ()):
                    yield RouteCandidate(part, src, dst, (v1,), (m1, m2), d1 + d2)
            for v2, middle in from_v1.items():
                if v2 == v1 or (loc_req and v2 not in wh):
                    continue
                last = self._legs.get((v2, part), {}).get(dst)
                if not last:
                    continue
                for (m1, d1), (m2, d2), (m3, d3) in itertools.product(first, middle, last):
                    if tm_req and m2 != ship:
                        continue
                    yield RouteCandidate(part, src, dst, (v1, v2), (m1, m2, m3), d1 + d2 + d3)

    def has_path(self, part: str, src: str, dst: str) -> bool:
        """Cheaper than ``bool(candidates(...))``: stops at the first route."""
        key = (part, src, dst)
        if key in self._cache:
            return bool(self._cache[key])
        return next(self._generate(part, src, dst), None) is not None

    def min_cost(self, part: str, src: str, dst: str) -> int | None:
        cands = self.candidates(part, src, dst)
        return cands[0].distance if cands else None


def build_problem(facts: FactSet, db: DerivedDB, config: SolveConfig = SolveConfig()) -> Problem:
    """Problem for ``config``; raises :class:`Infeasible` for the first part
    whose site domain is empty."""
    problem = Problem(facts, db, config)
    if problem.infeasibilities:
        raise problem.infeasibilities[0]
    return problem


def count_choice_points(problem: Problem) -> int:
    return choice_point_count(problem.facts, problem.variant)


# -- search ------------------------------------------------------------------

class _Timeout(Exception):
    pass


class _Search:
    """Depth-first placement search shared by enumeration and optimization."""

    def __init__(self, problem: Problem, deadline: float | None = None):
        self.pb = problem
        self.deadline = deadline
        seed = problem.config.seed
        self.order = list(problem.parts)
        self.domains = {}
        for p in self.order:
            dom = list(problem.domains[p])
            if seed:
                random.Random(f"{seed}:{p}").shuffle(dom)
            self.domains[p] = dom
        self.coverers = {
            loc: [p for p in self.order if any(loc in v for v in problem.domains[p])]
            for loc in problem.production_locs
        }
        self.edges_of: dict[str, list[tuple[str, str]]] = defaultdict(list)
        for sup, part in problem.plan:
            self.edges_of[part].append((sup, part))
            if sup != part:
                self.edges_of[sup].append((sup, part))
        self._edge_ok: dict = {}
        self.nodes = 0

    def _tick(self):
        self.nodes += 1
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise _Timeout

    def edge_feasible(self, sup: str, part: str, vs: tuple[str, ...], vp: tuple[str, ...]) -> bool:
        key = (sup, part, vs, vp)
        ok = self._edge_ok.get(key)
        if ok is None:
            ok = all(self.pb.has_path(part, f, t) for f in vp for t in vs)
            self._edge_ok[key] = ok
        return ok

    def _compatible(self, part: str, value, other: str, w) -> bool:
        """Can ``part=value`` and ``other=w`` coexist along their plan edges?"""
        for sup, child in self.edges_of[part]:
            if child == part and sup == other and not self.edge_feasible(sup, part, w, value):
                return False
            if sup == part and child == other and not self.edge_feasible(part, other, value, w):
                return False
        return True

    def propagate(self, assign: dict, live: dict, part: str):
        """Forward-check ``part``'s new value. Returns the pruned neighbour
        domains to restore on backtrack, or ``None`` on a wipe-out."""
        value = assign[part]
        saved = {}
        for sup, child in self.edges_of[part]:
            other = sup if child == part else child
            if other in assign or other in saved:
                continue
            kept = [w for w in live[other] if self._compatible(part, value, other, w)]
            saved[other] = live[other]
            live[other] = kept
            if not kept:
                return saved, False
        covered = set().union(*assign.values())
        for loc, coverers in self.coverers.items():
            if loc in covered:
                continue
            if not any(p not in assign and any(loc in w for w in live[p]) for p in coverers):
                return saved, False
        return saved, True

    def assignments(self) -> Iterator[dict]:
        assign: dict[str, tuple[str, ...]] = {}
        live = {p: list(self.domains[p]) for p in self.order}

        def rec(i: int):
            self._tick()
            if i == len(self.order):
                yield dict(assign)
                return
            # most constrained part first; ties by name keep the order stable
            part = min((p for p in self.order if p not in assign), key=lambda p: (len(live[p]), p))
            for value in list(live[part]):
                assign[part] = value
                saved, ok = self.propagate(assign, live, part)
                if ok:
                    yield from rec(i + 1)
                live.update(saved)
                del assign[part]

        if not self.order:
            # no parts: valid only if there is nothing to cover
            if not self.pb.production_locs:
                yield {}
            return
        if any(not live[p] for p in self.order):
            return
        yield from rec(0)


def _path_options(problem: Problem, assign: Mapping[str, tuple[str, ...]]):
    keys, options = [], []
    root = problem.root
    if root is not None and root in assign:
        keys.append(None)
        options.append([RootPath(root, at) for at in assign[root]])
    for key in problem.required_keys(assign):
        cands = list(problem.candidates(*key))
        if problem.config.seed:
            random.Random(f"{problem.config.seed}:{key}").shuffle(cands)
        keys.append(key)
        options.append(cands)
    return keys, options


def _make_model(assign, keys, combo) -> Model:
    paths = {}
    for key, choice in zip(keys, combo):
        if key is None:
            key = (choice.part, choice.at, choice.at)
        paths[key] = choice
    return Model.build(assign, paths)


def enumerate_models(problem: Problem, limit: int | None = None, deadline: float | None = None) -> Iterator[Model]:
    """Yield every valid configuration, in a deterministic order.

    ``limit`` defaults to the problem's config limit. An empty stream means
    the instance is unsatisfiable.
    """
    limit = problem.config.limit if limit is None else limit
    produced = 0
    search = _Search(problem, deadline)
    try:
        for assign in search.assignments():
            keys, options = _path_options(problem, assign)
            for combo in itertools.product(*options):
                yield _make_model(assign, keys, combo)
                produced += 1
                if limit is not None and produced >= limit:
                    return
    except _Timeout:
        raise TimeoutError("search deadline exceeded") from None


def first_model(problem: Problem, deadline: float | None = None) -> Model | None:
    return next(enumerate_models(problem, limit=1, deadline=deadline), None)


class _EdgeCosts:
    """Exact edge cost per (super value, part value), with memoized bounds."""

    def __init__(self, problem: Problem, search: _Search):
        self.pb = problem
        self.search = search
        self.table: dict = {}
        self.global_min: dict = {}

    def cost(self, sup, part, vs, vp) -> int | None:
        key = (sup, part, vs, vp)
        if key not in self.table:
            total = 0
            for f in vp:
                for t in vs:
                    c = self.pb.min_cost(part, f, t)
                    if c is None:
                        total = None
                        break
                    total += c
                if total is None:
                    break
            self.table[key] = total
        return self.table[key]

    def bound(self, sup, part, assign) -> int | None:
        vs_opts = [assign[sup]] if sup in assign else self.search.domains[sup]
        vp_opts = [assign[part]] if part in assign else self.search.domains[part]
        if sup not in assign and part not in assign and (sup, part) in self.global_min:
            return self.global_min[sup, part]
        best = None
        for vs in vs_opts:
            for vp in vp_opts:
                c = self.cost(sup, part, vs, vp)
                if c is not None and (best is None or c < best):
                    best = c
        if sup not in assign and part not in assign:
            self.global_min[sup, part] = best
        return best


def _best_paths(problem: Problem, assign) -> dict[PathKey, PathChoice]:
    paths: dict[PathKey, PathChoice] = {}
    if problem.root is not None and problem.root in assign:
        at = min(assign[problem.root])
        paths[(problem.root, at, at)] = RootPath(problem.root, at)
    for key in problem.required_keys(assign):
        paths[key] = problem.candidates(*key)[0]
    return paths


def optimize(problem: Problem, deadline: float | None = None) -> tuple[Model, int] | None:
    """Minimum-distance configuration by branch-and-bound, or ``None`` if UNSAT.

    The bound adds, per plan edge, the exact cost once both ends are placed and
    otherwise the cheapest cost over the remaining placements of the open
    end(s). Ties go to the lexicographically smallest placement.
    """
    search = _Search(problem, deadline)
    costs = _EdgeCosts(problem, search)
    plan = problem.plan
    strict_prune = problem.config.seed == 0  # DFS order is then lexicographic
    # edge costs only add up to the model distance when no (part, from, to)
    # is shared between edges, i.e. every part has at most one super
    n_supers = defaultdict(int)
    for _, part in plan:
        n_supers[part] += 1
    bounded = all(n <= 1 for n in n_supers.values())
    best_cost: int | None = None
    best_assign: dict | None = None

    def lower_bound(assign) -> int | None:
        total = 0
        for sup, part in plan:
            b = costs.bound(sup, part, assign)
            if b is None:
                return None
            total += b
        return total

    def canon(assign):
        return tuple(sorted(assign.items()))

    assign: dict[str, tuple[str, ...]] = {}
    order = search.order

    def rec(i: int):
        nonlocal best_cost, best_assign
        search._tick()
        lb = lower_bound(assign)
        if lb is None:
            return
        if bounded and best_cost is not None and (lb > best_cost or (strict_prune and lb == best_cost)):
            return
        if i == len(order):
            cost = total_distance(_best_paths(problem, assign).values())
            if best_cost is None or cost < best_cost or (cost == best_cost and canon(assign) < canon(best_assign)):
                best_cost, best_assign = cost, dict(assign)
            return
        part = order[i]
        for value in list(live[part]):
            assign[part] = value
            saved, ok = search.propagate(assign, live, part)
            if ok:
                rec(i + 1)
            live.update(saved)
            del assign[part]

    live = {p: list(search.domains[p]) for p in order}
    try:
        if order and all(live.values()):
            rec(0)
        elif not problem.production_locs:
            best_cost, best_assign = 0, {}
    except _Timeout:
        raise TimeoutError("search deadline exceeded") from None
    if best_assign is None:
        return None
    model = Model.build(best_assign, _best_paths(problem, best_assign))
    return model, model.total_distance


# -- verification ------------------------------------------------------------

def _fmt_key(key) -> str:
    return "(" + ", ".join(key) + ")"


def _leg_ok(problem: Problem, cand: RouteCandidate) -> bool:
    """The candidate is a chain of derivable legs whose distances sum up."""
    sums = {0}
    for a, b, m in cand.legs():
        ds = problem.leg_distances.get((a, b, cand.part, m))
        if not ds:
            return False
        sums = {s + d for s in sums for d in ds}
    return cand.distance in sums


def _route_violation(problem: Problem, key: PathKey, cand) -> str | None:
    part, f, t = key
    where = _fmt_key(key)
    if not isinstance(cand, RouteCandidate):
        return f"path stitching: {where} is not a route"
    if (cand.part, cand.src, cand.dst) != key:
        return f"path stitching: {where} holds a route for ({cand.part}, {cand.src}, {cand.dst})"
    if len(cand.means) != len(cand.vias) + 1 or len(cand.vias) > 2:
        return f"path stitching: {where} malformed route"
    if not _leg_ok(problem, cand):
        return f"path stitching: {where} uses a leg that cannot be derived"
    if cand.vias and f == t:
        return f"path stitching: {where} via route must change location"
    if len(cand.vias) == 2 and cand.vias[0] == cand.vias[1]:
        return f"path stitching: {where} repeats its via location"
    v = problem.variant
    if cand.vias and v.loc_type_req:
        pl, wh = problem.facts.production_locs, problem.facts.warehouse_locs
        if f not in pl or t not in pl or any(x not in wh for x in cand.vias):
            return f"path stitching: {where} violates location-type requirement"
    if len(cand.vias) == 2 and v.tm_type_req and cand.means[1] != problem.db.ship:
        return f"path stitching: {where} violates transport-mean requirement"
    if not problem.config.strict_paper_duplicates and INTRA_SITE in cand.means and len(cand.means) > 1:
        return f"path stitching: {where} pads a shorter route with intra-site legs"
    return None


def check_model(problem: Problem, m: Model) -> list[str]:
    """Every broken model invariant, as ``"rule: detail"`` strings."""
    out: list[str] = []
    pb = problem
    assign = m.assignment
    for part in pb.parts:
        sites = assign.get(part)
        if sites is None or len(set(sites)) != pb.k or len(sites) != pb.k:
            out.append(f"choice cardinality: {part}")
            continue
        for s in sites:
            if s not in pb.produceable[part]:
                out.append(f"produceability: {part}@{s}")
        if pb.k == 2:
            shared = pb.shared_country(*sites)
            if shared:
                out.append(f"country IC: {part} at {sites[0]} and {sites[1]} share {','.join(sorted(shared))}")
    for extra in sorted(set(assign) - set(pb.parts)):
        out.append(f"choice cardinality: {extra} is not a part")

    covered = set().union(*assign.values()) if assign else set()
    for loc in pb.production_locs:
        if loc not in covered:
            out.append(f"location coverage: {loc}")

    required = set(pb.required_keys(assign))
    root_keys = []
    for key, path in sorted(m.paths.items()):
        if isinstance(path, RootPath):
            root_keys.append(key)
            if path.part != pb.root or key != (path.part, path.at, path.at) or path.at not in assign.get(path.part, ()):
                out.append(f"root path: {_fmt_key(key)}")
        elif key not in required:
            out.append(f"path cardinality: extra {_fmt_key(key)}")
        else:
            problem_text = _route_violation(pb, key, path)
            if problem_text:
                out.append(problem_text)
    for key in sorted(required - set(m.paths)):
        out.append(f"path cardinality: {_fmt_key(key)}")
    if pb.root is not None and pb.root in assign and len(root_keys) != 1:
        out.append(f"root path: {pb.root} needs exactly one, has {len(root_keys)}")

    dist = total_distance(m.paths.values())
    legs = sum(len(p.means) for p in m.paths.values())
    if (m.total_distance, m.leg_count) != (dist, legs):
        out.append(f"kpi: stored ({m.total_distance}, {m.leg_count}) != recomputed ({dist}, {legs})")
    return out
