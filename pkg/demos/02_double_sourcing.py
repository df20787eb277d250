"""Double sourcing: every part comes from two sites in different countries.

Builds a small instance in memory with four plants and two parts. Single
sourcing is UNSAT because every production location must host a part; double
sourcing fills all four. Moving one plant across the border then shows the country constraint
failing before any search.
"""
from logiconf import SolveConfig, derive, enumerate_models, optimize, parse_fact_file
from logiconf.solve import Infeasible, build_problem

lines = [
    "country(a).", "country(b).",
    "productionLoc(a1).", "productionLoc(a2).", "productionLoc(b1).", "productionLoc(b2).",
    "locatedIn(a1,a).", "locatedIn(a2,a).", "locatedIn(b1,b).", "locatedIn(b2,b).",
    "transportMean(truck).",
    "part(r).", "part(s).", "productionPlan(r,s).",
    "canTransport(truck,s).",
    "partProduceableAt(r,a1).", "partProduceableAt(r,b2).",
    "partProduceableAt(s,a2).", "partProduceableAt(s,b1).",
]
for loc in ("a1", "a2", "b1", "b2"):
    lines.append(f"transportMeanAtSite({loc},truck).")
for src, dst, d in [("a2", "a1", 2), ("a2", "b2", 9), ("b1", "a1", 8), ("b1", "b2", 3)]:
    lines.append(f"transportRoute({src},{dst},truck,{d}).")
facts = parse_fact_file("\n".join(lines))
db = derive(facts)

for sourcing in ("single", "double"):
    problem = build_problem(facts, db, SolveConfig(sourcing=sourcing))
    models = list(enumerate_models(problem))
    result = optimize(problem)
    if result is None:
        print(f"{sourcing}: UNSAT")
        continue
    best, cost = result
    print(f"{sourcing}: {len(models)} configurations, optimum {cost}, best sites {dict(best.assignment)}")

# move b1 into country a: both sites for s now share a country
narrow = facts.replace(located_in=(facts.located_in - {("b1", "b")}) | {("b1", "a")})
try:
    build_problem(narrow, derive(narrow), SolveConfig(sourcing="double"))
except Infeasible as exc:
    print("infeasible:", exc)
