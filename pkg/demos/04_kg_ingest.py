"""Turn a knowledge-graph triple file into facts and solve it.

The triples use the class/property vocabulary of the ingest layer: locations
with terminals, products with sub-parts, and routes as reified nodes.
"""
import io

from logiconf import SolveConfig, kg_to_facts, optimize, read_kg, run_assertions
from logiconf.kb import format_facts, materialize_inverses, shape_check
from logiconf.solve import Problem

KG = """subject,predicate,object
aCountry,type,Country
bCountry,type,Country
aP,type,ProductionLocation
bP,type,ProductionLocation
bH,type,WarehouseLocation
aP,is_located_in,aCountry
bP,is_located_in,bCountry
bH,is_located_in,bCountry
truck,type,TransportationResource
ship,type,TransportationResource
aP,can_handle,truck
bP,can_handle,truck
bH,can_handle,truck
bH,has_terminal,bHarbour
bHarbour,can_handle,ship
engine,type,Product
piston,type,Product
engine,has_part,piston
truck,can_transport,piston
bP_line,has_location,bP
bP_line,can_produce,piston
aP,can_produce,engine
r1,type,Route
r1,has_source,bP
r1,has_destination,aP
r1,has_transport_mean,truck
r1,distance,11
"""

kg = materialize_inverses(read_kg(io.StringIO(KG)))
print("shape violations:", shape_check(kg))
facts = kg_to_facts(kg)
print(format_facts(facts), end="")
print(run_assertions(facts).to_text(), end="")

best, cost = optimize(Problem.from_facts(facts, SolveConfig()))
print("optimum", cost, dict(best.assignment))
