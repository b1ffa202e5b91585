"""Walkthrough: corpus metrics (BLEU, ROUGE, METEOR, Levenshtein, Seq-O) and
how corruption baselines separate on them.

Run: python demos/03_evaluation_metrics.py
"""

from procrew import evaluate_corpus, parse_procedure, render_procedure, seq_o
from procrew.judge import MODE_ORACLE, MODE_SWAP_ACTIONS, corrupt

REFERENCE = """\
make_solution(solute=[chem("benzaldehyde", mass=5 g)], solvent=chem("methanol", volume=50 mL)) -> mix(1);
add(source=[chem("sodium borohydride", mass=1 g)], target=mix(1)) -> mix(2);
wait(time_period=2 h);
quench(target=mix(2), agent=chem("ammonium chloride")) -> mix(3);
yield_statement(product=chem("benzyl alcohol"), target=mix(3));
"""

ref = parse_procedure(REFERENCE)

# the oracle baseline renames chemicals through a synonym table (methanol ->
# MeOH etc.); structure is untouched, so the verb sequence still matches
oracle = corrupt(ref, MODE_ORACLE)
# swapping two reaction-phase steps breaks the verb sequence
swapped = corrupt(ref, MODE_SWAP_ACTIONS, rng_seed=3)

print("Seq-O oracle vs reference: ", seq_o(oracle, ref))
print("Seq-O swapped vs reference:", seq_o(swapped, ref))

pairs = [
    (render_procedure(ref), render_procedure(ref)),
    (render_procedure(ref), render_procedure(oracle)),
    (render_procedure(ref), render_procedure(swapped)),
]
for label, pair in zip(("identical", "oracle", "swapped"), pairs):
    report = evaluate_corpus([pair])
    print(f"\n{label} prediction:")
    print(report.to_table())

# corpus-level report over all three pairs at once
print("\nwhole corpus:")
report = evaluate_corpus(pairs)
print(report.to_table())
print("pairs scored:", report.n_pairs)
