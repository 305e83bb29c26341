"""
Completing rows with missing fields
===================================

A relation holds complete observations plus rows with unknown fields.  Each
unknown row becomes a block of mutually exclusive choice tuples, one per
candidate completion seen among the complete rows; block rules derive the
completed rows and frequency labels transfer the observed distribution.
Learning then assigns each candidate its evidence-supported probability.
"""

from pdblearn import LearnerConfig, derive_from_incomplete, format_formula

# city observations: the last column is sometimes missing
complete = [
    ("paris", "france"),
    ("paris", "france"),
    ("lyon", "france"),
    ("turin", "italy"),
]
incomplete = [
    ("paris", None),   # country unknown, but 'paris' rows all say france
    (None, "france"),  # city unknown: two candidates with a 2:1 split
]

red = derive_from_incomplete(
    complete, incomplete, relation="city", cfg=LearnerConfig(eps_abs=1e-10, eps_rel=0.0)
)

print("choice tuples (one per candidate completion, learnable)")
for t in sorted(red.db.tuples):
    print(f"  {t}")

print("\nblock rules forcing at most one choice per row")
print(red.program)

print("frequency labels on the derived completions")
for lab in red.problem.labels:
    print(f"  target={lab.target:.4f}  {format_formula(lab.formula)}")

# the mutual-exclusion structure can make exact frequencies unreachable, but
# the learned ranking still follows the evidence
print("\nlearned completion probabilities")
for i, (options, best) in enumerate(zip(red.completions, red.best)):
    print(f"  row {i}: best={best}")
    for args, p in sorted(options.items()):
        print(f"    {args}: {p:.4f}")
