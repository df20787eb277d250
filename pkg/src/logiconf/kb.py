"""Ground facts of an industrial logistics system.

Two input routes produce a :class:`FactSet`:

* a logic-program style fact file (``country(aCountry).`` one per line), and
* a flat triple document exported from a knowledge graph, which is mapped
  onto the eleven fact relations by :func:`kg_to_facts`.

Symbols are plain ``str`` at this level. :class:`SymbolTable` interns them to
dense integer ids for the array-based counting in :mod:`logiconf.ground`.
"""
from __future__ import annotations

import csv
import io
import re
from collections import defaultdict
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

__all__ = [
    "FactSet",
    "FactSyntaxError",
    "KGError",
    "PREDICATES",
    "ShapeViolation",
    "SymbolTable",
    "Triple",
    "TripleSet",
    "format_facts",
    "kg_to_facts",
    "load_facts",
    "materialize_inverses",
    "parse_fact_file",
    "read_kg",
    "shape_check",
    "write_kg",
]


class SymbolTable:
    """Bijective interning of symbol text to dense integer ids."""

    def __init__(self, names: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        for name in names:
            self.intern(name)

    def intern(self, name: str) -> int:
        sid = self._ids.get(name)
        if sid is None:
            sid = self._ids[name] = len(self._names)
            self._names.append(name)
        return sid

    def id(self, name: str) -> int:
        return self._ids[name]

    def text(self, sid: int) -> str:
        return self._names[sid]

    def __contains__(self, name: object) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)


@dataclass(frozen=True)
class FactSet:
    """The eleven extensional relations of a logistics instance.

    Every relation is a frozenset, so duplicate facts collapse. Route tuples are
    ``(source, destination, mean, distance)``; plan tuples are ``(super, part)``.
    """

    countries: frozenset[str] = frozenset()
    production_locs: frozenset[str] = frozenset()
    warehouse_locs: frozenset[str] = frozenset()
    located_in: frozenset[tuple[str, str]] = frozenset()
    transport_means: frozenset[str] = frozenset()
    transport_mean_at_site: frozenset[tuple[str, str]] = frozenset()
    parts: frozenset[str] = frozenset()
    can_transport: frozenset[tuple[str, str]] = frozenset()
    part_produceable_at: frozenset[tuple[str, str]] = frozenset()
    transport_routes: frozenset[tuple[str, str, str, int]] = frozenset()
    production_plan: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, frozenset):
                object.__setattr__(self, f.name, frozenset(value))

    @property
    def locations(self) -> frozenset[str]:
        return self.production_locs | self.warehouse_locs

    def counts(self) -> dict[str, int]:
        """Number of facts per predicate name, in canonical predicate order."""
        return {pred: len(getattr(self, attr)) for pred, (attr, _) in PREDICATES.items()}

    def replace(self, **changes) -> "FactSet":
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update(changes)
        return FactSet(**current)

    def __len__(self) -> int:
        return sum(self.counts().values())


# predicate name -> (FactSet attribute, arity)
PREDICATES: dict[str, tuple[str, int]] = {
    "country": ("countries", 1),
    "productionLoc": ("production_locs", 1),
    "warehouseLoc": ("warehouse_locs", 1),
    "locatedIn": ("located_in", 2),
    "transportMean": ("transport_means", 1),
    "transportMeanAtSite": ("transport_mean_at_site", 2),
    "part": ("parts", 1),
    "canTransport": ("can_transport", 2),
    "partProduceableAt": ("part_produceable_at", 2),
    "transportRoute": ("transport_routes", 4),
    "productionPlan": ("production_plan", 2),
}


class FactSyntaxError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


_FACT_RE = re.compile(r"^([A-Za-z_]\w*)\s*\((.*)\)\s*\.$")
_SYMBOL_RE = re.compile(r"^[a-z]\w*$")
_INT_RE = re.compile(r"^-?\d+$")


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def parse_fact_file(text: str | Iterable[str]) -> FactSet:
    """Parse ``predicate(arg, ...).`` lines into a :class:`FactSet`.

    ``text`` may be a string or any iterable of lines (an open file works).
    ``%`` starts a comment. Raises :class:`FactSyntaxError` with the 1-based
    line number on malformed lines, unknown predicates, wrong arity, or a
    non-integer route distance.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    collected: dict[str, set] = {attr: set() for attr, _ in PREDICATES.values()}
    for lineno, raw in enumerate(lines, start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        m = _FACT_RE.match(line)
        if m is None:
            raise FactSyntaxError(lineno, f"expected 'predicate(args).', got {raw.strip()!r}")
        name, argtext = m.groups()
        if name not in PREDICATES:
            raise FactSyntaxError(lineno, f"unknown predicate {name!r}")
        attr, arity = PREDICATES[name]
        args = [a.strip() for a in argtext.split(",")] if argtext.strip() else []
        if len(args) != arity:
            raise FactSyntaxError(lineno, f"{name} expects {arity} argument(s), got {len(args)}")
        if name == "transportRoute":
            *syms, dist = args
            if not _INT_RE.match(dist):
                raise FactSyntaxError(lineno, f"distance must be an integer, got {dist!r}")
            values: list = syms
        else:
            syms, values = args, args
        for s in syms:
            if not _SYMBOL_RE.match(s):
                raise FactSyntaxError(lineno, f"invalid constant {s!r}")
        if name == "transportRoute":
            values = [*syms, int(dist)]
        collected[attr].add(values[0] if arity == 1 else tuple(values))
    return FactSet(**{attr: frozenset(v) for attr, v in collected.items()})


def load_facts(path: str | Path) -> FactSet:
    with open(path, encoding="utf-8") as fh:
        return parse_fact_file(fh)


def format_facts(facts: FactSet) -> str:
    """Serialize to fact-file text; sorted, so output is deterministic."""
    out = []
    for pred, (attr, arity) in PREDICATES.items():
        rows = getattr(facts, attr)
        for row in sorted(rows):
            args = (row,) if arity == 1 else row
            out.append(f"{pred}({','.join(str(a) for a in args)}).")
    return "\n".join(out) + ("\n" if out else "")


# -- knowledge-graph triples ------------------------------------------------

class Triple(NamedTuple):
    subject: str
    predicate: str
    object: str | int


class TripleSet(frozenset):
    """Immutable set of :class:`Triple`. Plain tuples are coerced."""

    def __new__(cls, triples: Iterable = ()):
        return super().__new__(cls, (Triple(*t) for t in triples))

    def with_predicate(self, predicate: str) -> list[Triple]:
        return [t for t in self if t.predicate == predicate]


def read_kg(source: str | Path | io.TextIOBase) -> TripleSet:
    """Read a triple document: CSV with header ``subject,predicate,object``.

    Objects made only of digits (optionally signed) are integer literals;
    everything else is a symbol.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return read_kg(fh)
    reader = csv.DictReader(source)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["subject", "predicate", "object"]:
        raise ValueError("KG document must have header: subject,predicate,object")
    triples = []
    for row in reader:
        obj = row["object"].strip()
        triples.append((row["subject"].strip(), row["predicate"].strip(), int(obj) if _INT_RE.match(obj) else obj))
    return TripleSet(triples)


def write_kg(kg: TripleSet, dest: io.TextIOBase) -> None:
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(["subject", "predicate", "object"])
    for t in sorted(kg, key=lambda t: (t.subject, t.predicate, str(t.object))):
        writer.writerow(t)


def materialize_inverses(kg: TripleSet) -> TripleSet:
    """Add ``is_transported_by(p, m)`` for every ``can_transport(m, p)``."""
    extra = [(t.object, "is_transported_by", t.subject) for t in kg.with_predicate("can_transport")]
    return TripleSet([*kg, *extra])


# class names of the KG vocabulary
COUNTRY = "Country"
PRODUCTION_LOCATION = "ProductionLocation"
WAREHOUSE_LOCATION = "WarehouseLocation"
TRANSPORT_RESOURCE = "TransportationResource"
PRODUCT = "Product"
ROUTE = "Route"

_ROUTE_FIELDS = ("has_source", "has_destination", "has_transport_mean", "distance")


class KGError(ValueError):
    def __init__(self, subject: str, message: str):
        super().__init__(f"{subject}: {message}")
        self.subject = subject


def _instances(kg: TripleSet) -> dict[str, set[str]]:
    """Class name -> instances, honouring ``subclass_of`` transitively."""
    parents: dict[str, set[str]] = defaultdict(set)
    for t in kg.with_predicate("subclass_of"):
        parents[t.subject].add(t.object)

    def ancestors(cls: str) -> set[str]:
        seen, stack = {cls}, [cls]
        while stack:
            for p in parents.get(stack.pop(), ()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    members: dict[str, set[str]] = defaultdict(set)
    for t in kg.with_predicate("type"):
        for cls in ancestors(t.object):
            members[cls].add(t.subject)
    return members


def _by_subject(kg: TripleSet, predicate: str) -> dict[str, list]:
    out: dict[str, list] = defaultdict(list)
    for t in kg.with_predicate(predicate):
        out[t.subject].append(t.object)
    return out


def _route_nodes(kg: TripleSet, members) -> set[str]:
    nodes = set(members.get(ROUTE, ()))
    for pred in _ROUTE_FIELDS:
        nodes.update(_by_subject(kg, pred))
    return nodes


def kg_to_facts(kg: TripleSet) -> FactSet:
    """Map a knowledge-graph triple set onto the eleven fact relations.

    Composite facts: ``has_terminal`` + ``can_handle`` (or ``can_handle``
    asserted directly on a location) give transportMeanAtSite;
    ``has_location`` + ``can_produce`` on a production resource give
    partProduceableAt; route nodes give transportRoute. ``can_transport`` and
    its inverse ``is_transported_by`` both feed canTransport.
    """
    members = _instances(kg)
    locations = members.get(PRODUCTION_LOCATION, set()) | members.get(WAREHOUSE_LOCATION, set())

    handles = _by_subject(kg, "can_handle")
    tmas = set()
    for loc, terminals in _by_subject(kg, "has_terminal").items():
        for term in terminals:
            if term not in handles:
                raise KGError(term, "terminal has no can_handle")
            tmas.update((loc, m) for m in handles[term])
    for loc in locations & handles.keys():
        tmas.update((loc, m) for m in handles[loc])

    can_transport = {(t.subject, t.object) for t in kg.with_predicate("can_transport")}
    can_transport |= {(t.object, t.subject) for t in kg.with_predicate("is_transported_by")}

    has_location = _by_subject(kg, "has_location")
    can_produce = _by_subject(kg, "can_produce")
    produceable = set()
    for res in has_location.keys() | can_produce.keys():
        if res in locations and not has_location.get(res):
            # like can_handle, can_produce may sit on the location itself
            has_location[res] = [res]
        if not has_location.get(res) or not can_produce.get(res):
            missing = "has_location" if not has_location.get(res) else "can_produce"
            raise KGError(res, f"production resource missing {missing}")
        produceable.update((p, loc) for loc in has_location[res] for p in can_produce[res])

    routes = set()
    route_fields = {pred: _by_subject(kg, pred) for pred in _ROUTE_FIELDS}
    for node in sorted(_route_nodes(kg, members)):
        values = []
        for pred in _ROUTE_FIELDS:
            got = route_fields[pred].get(node, [])
            if len(got) != 1:
                raise KGError(node, f"route needs exactly one {pred}, found {len(got)}")
            values.append(got[0])
        if not isinstance(values[3], int):
            raise KGError(node, f"route distance is not an integer: {values[3]!r}")
        routes.add(tuple(values))

    return FactSet(
        countries=members.get(COUNTRY, ()),
        production_locs=members.get(PRODUCTION_LOCATION, ()),
        warehouse_locs=members.get(WAREHOUSE_LOCATION, ()),
        located_in={(t.subject, t.object) for t in kg.with_predicate("is_located_in")},
        transport_means=members.get(TRANSPORT_RESOURCE, ()),
        transport_mean_at_site=tmas,
        parts=members.get(PRODUCT, ()),
        can_transport=can_transport,
        part_produceable_at=produceable,
        transport_routes=routes,
        production_plan={(t.subject, t.object) for t in kg.with_predicate("has_part")},
    )


class ShapeViolation(NamedTuple):
    subject: str
    message: str


def _exactly_one(subject: str, values: list, what: str) -> list[ShapeViolation]:
    if not values:
        return [ShapeViolation(subject, f"missing {what}")]
    if len(values) > 1:
        return [ShapeViolation(subject, f"multiple {what} values")]
    return []


def shape_check(kg: TripleSet) -> list[ShapeViolation]:
    """Validate the built-in shapes; returns violations sorted by subject."""
    members = _instances(kg)
    out: list[ShapeViolation] = []

    located = _by_subject(kg, "is_located_in")
    for loc in members.get(PRODUCTION_LOCATION, set()) | members.get(WAREHOUSE_LOCATION, set()):
        got = located.get(loc, [])
        if not got:
            out.append(ShapeViolation(loc, "missing country"))
        elif len(got) > 1:
            out.append(ShapeViolation(loc, "multiple countries"))

    route_fields = {pred: _by_subject(kg, pred) for pred in _ROUTE_FIELDS}
    names = {"has_source": "source", "has_destination": "destination",
             "has_transport_mean": "transport mean", "distance": "distance"}
    for node in _route_nodes(kg, members):
        for pred in _ROUTE_FIELDS:
            out += _exactly_one(node, route_fields[pred].get(node, []), names[pred])
        dists = route_fields["distance"].get(node, [])
        if len(dists) == 1:
            if not isinstance(dists[0], int):
                out.append(ShapeViolation(node, "non-integer distance"))
            elif dists[0] < 0:
                out.append(ShapeViolation(node, "negative distance"))

    products = members.get(PRODUCT, set())
    for t in kg.with_predicate("has_part"):
        for ref in (t.subject, t.object):
            if ref not in products:
                out.append(ShapeViolation(ref, "has_part references unknown product"))
    return sorted(set(out))
