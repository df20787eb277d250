"""Walk through the bundled five-location instance end to end.

Loads the facts, checks them, derives the transport options, enumerates and
optimizes configurations, then writes CSV tables and SVG plots to ./out/smallworld.
"""
import importlib.resources
from pathlib import Path

from logiconf import SolveConfig, Variant, derive, derive_candidates, enumerate_models, load_facts, optimize, run_assertions
from logiconf.solve import build_problem, count_choice_points
from logiconf.viz import export_csv, read_layout, render_map, render_scatter, write_model_tables, write_svg

data = importlib.resources.files("logiconf") / "data"
facts = load_facts(str(data / "smallworld.lp"))
print("facts:", facts.counts())

# assertions run before anything else; a clean instance has no findings
print(run_assertions(facts).to_text(), end="")

db = derive(facts)
print(f"root part: {db.root}, closed routes: {len(db.routes)}, cbtft: {len(db.cbtft)}")
for v in Variant:
    c = derive_candidates(db, v)
    print(f"  {v.value:13s} direct={len(c.directs):3d} via1={len(c.via1s):3d} via2={len(c.via2s):3d}")

problem = build_problem(facts, db, SolveConfig())
print("choice points:", count_choice_points(problem))

models = list(enumerate_models(problem))
print(f"{len(models)} configurations, distances {min(m.total_distance for m in models)}"
      f"..{max(m.total_distance for m in models)}")

best, cost = optimize(problem)
print("optimum", cost)
for part, sites in sorted(best.assignment.items()):
    print(f"  {part} at {', '.join(sites)}")
for key, path in sorted(best.paths.items()):
    print("  ", key, getattr(path, "means", ()), path.distance)

out = Path("out/smallworld")
write_model_tables(models, out)
overview, _ = export_csv(models)
write_svg(render_scatter(overview, "totalDistance", "legCount"), out / "scatter.svg")
layout = read_layout(str(data / "smallworld_layout.csv"), facts)
write_svg(render_map(best, layout), out / "best_map.svg")
print("wrote", sorted(p.name for p in out.iterdir()))
