"""Walkthrough: reaction-fingerprint retrieval, the time-based dataset split,
and the quality gate.

Run: python demos/04_retrieval_and_datasets.py
"""

import datetime as dt
import tempfile
from pathlib import Path

from procrew import QualityScores, build_index, fingerprint, nearest, quality_gate, tanimoto, time_split
from procrew.dataset import Dataset, DatasetRecord
from procrew.retrieval import FingerprintIndex

TRAINING_REACTIONS = [
    "CCO.CC(=O)O>>CCOC(C)=O",          # esterification
    "CCO.CC(=O)Cl>>CCOC(C)=O",         # acyl chloride route
    "c1ccccc1B(O)O.Brc1ccccc1>>c1ccc(-c2ccccc2)cc1",  # coupling
    "O=Cc1ccccc1>>OCc1ccccc1",         # reduction
    "CC(=O)c1ccccc1>>CC(O)c1ccccc1",   # ketone reduction
]

# fingerprints hash reactant-side and product-side character shingles into a
# fixed-width bit vector; similar strings share bits
a = fingerprint(TRAINING_REACTIONS[0])
b = fingerprint(TRAINING_REACTIONS[1])
print(f"fingerprint width {a.width}, {a.n_set} bits set")
print(f"tanimoto(esterification, acyl-chloride route) = {tanimoto(a, b):.3f}")

index = build_index(TRAINING_REACTIONS)
query = "CCO.CC(=O)Br>>CCOC(C)=O"
print(f"\nquery: {query}")
for entry_id, similarity in nearest(query, index, k=3):
    print(f"  neighbor {entry_id}: similarity {similarity:.3f}  {TRAINING_REACTIONS[entry_id]}")

# the index persists as a compact binary file
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "reactions.pfpx"
    index.save(str(path))
    print(f"\nindex saved to {path.name}: {path.stat().st_size} bytes")
    print("reloaded equals original:", FingerprintIndex.load(str(path)).entries == index.entries)

# time-based split: the newest slice becomes the held-out test set, and
# records sharing a date never straddle the boundary
records = [
    DatasetRecord(id=f"r{i}", reaction=r, procedure_text="wait(time_period=1 h);", date=dt.date(2023, 1 + i % 12, 1))
    for i, r in enumerate(TRAINING_REACTIONS * 4)
]
train, test = time_split(Dataset(records=records), test_fraction=0.10)
print(f"\ntime split: {len(train)} train, {len(test)} test")
print("newest test date:", max(r.date for r in test.records))
print("newest train date:", max(r.date for r in train.records))

# quality gate used to curate training data: average >= 5 and no axis < 3
for scores in (QualityScores(6, 6, 6, 6), QualityScores(9, 9, 9, 2), QualityScores(5, 5, 5, 5)):
    print(f"gate{scores.as_tuple()}: {'keep' if quality_gate(scores) else 'drop'}")
