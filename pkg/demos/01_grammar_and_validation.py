"""Walkthrough: the procedure text format, parsing, rendering, validation,
and symbolic execution.

Run: python demos/01_grammar_and_validation.py
"""

from procrew import execute, parse_procedure, render_procedure, validate

TEXT = """\
# reductive workup example
make_solution(solute=[chem("benzaldehyde", mass=5 g)], solvent=chem("methanol", volume=50 mL)) -> mix(1);
change_temperature(target=mix(1), temperature=0 degC, agent=chem("ice bath"));
add(source=[chem("sodium borohydride", mass=1 g)], target=mix(1), time_period=30 min) -> mix(2);
wait(time_period=2 h);
quench(target=mix(2), agent=chem("ammonium chloride")) -> mix(3);
extract(target=mix(3), agent=chem("ethyl acetate"), times=3 x) -> mix(4);
yield_statement(product=chem("benzyl alcohol"), target=mix(4), yield=87 %);
"""

procedure = parse_procedure(TEXT)
print(f"parsed {len(procedure.actions)} actions")
print("action types:", [a.action_type.value for a in procedure.actions])

# rendering normalizes units (30 min -> 0.5 h, degC -> °C) and orders
# parameters canonically; parse(render(p)) == p
canonical = render_procedure(procedure)
print("\ncanonical form:")
print(canonical)
assert parse_procedure(canonical) == procedure

report = validate(procedure)
print("\nvalidation ok:", report.ok)
for d in report.diagnostics:
    print(f"  [{d.severity}] {d.code} at action {d.ordinal}: {d.message}")

trace = execute(procedure)
print("\nmixture dataflow:")
for index, prov in sorted(trace.mixtures.items()):
    print(f"  mix({index}): created by action {prov.created_by}, consumed by {prov.consumed_by}")
print("final products:", trace.final_products)

# broken programs get diagnostics instead of exceptions
broken = parse_procedure('add(source=[chem("a")], target=mix(7));')
bad_report = validate(broken)
print("\nbroken program ok:", bad_report.ok)
for d in bad_report.diagnostics:
    print(f"  [{d.severity}] {d.code}: {d.message}")
