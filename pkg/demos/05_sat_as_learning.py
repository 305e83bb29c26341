"""
3SAT as a probability-learning problem
======================================

Boolean labels make learning NP-hard, and the reduction is constructive: each
propositional variable becomes a pair of synthetic tuples forced to agree and
be deterministic, and each clause becomes a label with target 1.  The formula
is satisfiable exactly when the learner can push the squared residual to
zero, and rounding the learned probabilities reads off an assignment.
"""

from pdblearn import encode_3sat, mse, random_3sat, satisfies, solve_3sat

# (x1 | x2 | !x3) & (!x1 | x3 | x4) & ... as signed 1-based literals
clauses = [(1, 2, -3), (-1, 3, 4), (-2, -4, 1), (3, -1, -4)]

db, labels = encode_3sat(clauses, n_vars=4)
print(f"encoded: {len(db.tuples)} synthetic tuples, {len(labels)} labels")

res = solve_3sat(clauses, n_vars=4, restarts=20, seed=0)
assignment = {v: res.assignment[v] for v in sorted(res.assignment)}
print(f"satisfied={res.satisfied}  residual={res.mse:.2e}  restarts used={res.restarts_used}")
print(f"assignment: {assignment}")
print(f"check against the clauses: {satisfies(clauses, res.assignment)}")

# zero residual at the rounded corner certifies the assignment
corner = {t: 1.0 if res.assignment[(t.key[0] - 1) % 4 + 1] else 0.0 for t in db.tuples}
print(f"residual at the rounded corner: {mse(labels, corner):.1e}")

# generated instances are guaranteed satisfiable, so the solver must win
print("\nrandom satisfiable instances")
for seed in range(3):
    cnf = random_3sat(n_vars=6, n_clauses=12, seed=seed)
    out = solve_3sat(cnf, n_vars=6, restarts=20, seed=seed)
    print(f"  seed={seed}  satisfied={out.satisfied}  residual={out.mse:.2e}")
