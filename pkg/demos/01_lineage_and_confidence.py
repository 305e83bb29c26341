"""
Lineage and confidence of derived facts
=======================================

A probabilistic database stores uncertain rows.  Deduction rules derive new
facts from them, and every derived fact carries a lineage: the Boolean
formula over base tuples that records exactly how it was produced.  The
confidence of the fact is the probability of its lineage.
"""

from pathlib import Path

from pdblearn import (
    TupleId,
    format_formula,
    ground,
    load_rules,
    load_tuples,
    prob_bruteforce,
    prob_exact,
)

data = Path(__file__).parent / "data"

# the extraction tuples: four candidate facts plus the patterns and domains
# they came from (marked learnable in the file, so they carry no probability)
db = load_tuples(data / "tuples.tsv")

# pretend a previous learning run estimated the pattern/domain reliabilities
estimates = {
    TupleId("usingPattern", (1, "Received")): 0.5,
    TupleId("usingPattern", (2, "Won")): 0.6,
    TupleId("usingPattern", (3, "Born")): 0.2,
    TupleId("fromDomain", (1, "Wikipedia.org")): 0.8,
    TupleId("fromDomain", (2, "Imdb.com")): 0.4,
}
for t, p in estimates.items():
    db.add(t, p, learnable=True)

# ground the rules bottom-up; each derived tuple keeps its lineage formula
program = load_rules(data / "rules.dl")
derived = ground(program, db)

print("derived facts and their confidences")
p = db.probabilities()
for d in derived:
    confidence = prob_exact(d.lineage, p)
    name = f"{d.relation}({','.join(map(str, d.args))})"
    print(f"  {name:35s} {confidence:.4f}")
    print(f"    lineage: {format_formula(d.lineage)}")

# exact inference decomposes the formula; brute force sums the worlds.
# they must agree to floating-point accuracy
print("\nexact vs. brute-force world enumeration")
for d in derived:
    exact = prob_exact(d.lineage, p)
    brute = prob_bruteforce(d.lineage, p)
    print(f"  {d.relation:10s} exact={exact:.12f} brute={brute:.12f} gap={abs(exact - brute):.2e}")
