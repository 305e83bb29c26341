"""
Learning tuple probabilities from labeled formulas
==================================================

Labels demand that a lineage formula hold with a given probability.  Gradient
descent over the base-tuple probabilities (in logit space, so the box
constraints take care of themselves) drives the mean squared residual of the
labels toward zero.

Three small instances show the possible outcomes: a unique optimum, a
two-solution optimum where the seed picks the side, and an inconsistent
instance where only a nonzero residual remains.
"""

from pathlib import Path

from pdblearn import (
    And,
    Label,
    LearnerConfig,
    LearningProblem,
    Or,
    TupleId,
    Var,
    learn,
    load_instance,
)

t7 = TupleId("usingPattern", (3, "Born"))
t8 = TupleId("fromDomain", (1, "Wikipedia.org"))


def fresh_pair():
    from pdblearn import ProbabilisticDatabase

    db = ProbabilisticDatabase()
    db.add(t7, learnable=True)
    db.add(t8, learnable=True)
    return db


cfg = LearnerConfig(eps_abs=1e-10, eps_rel=0.0, seed=0)

# single-tuple labels pin each probability directly: unique optimum
out = learn(
    LearningProblem(fresh_pair(), (Label(Var(t7), 0.4), Label(Var(t8), 0.7))), cfg
)
print("unique optimum")
print(f"  p(t7)={out.probabilities[t7]:.4f}  p(t8)={out.probabilities[t8]:.4f}")
print(f"  residual={out.best:.2e}  status={out.status}  iterations={out.iterations}")

# conjunction + disjunction labels admit two symmetric solutions; different
# seeds land on different sides
two_sided = (Label(And(Var(t7), Var(t8)), 0.1), Label(Or(Var(t7), Var(t8)), 0.6))
print("\ntwo-solution instance, four seeds")
for seed in (0, 1, 5, 9):
    out = learn(
        LearningProblem(fresh_pair(), two_sided),
        LearnerConfig(eps_abs=1e-10, eps_rel=0.0, seed=seed),
    )
    print(f"  seed={seed}  p=({out.probabilities[t7]:.4f}, {out.probabilities[t8]:.4f})")

# an inconsistent instance: no probabilities satisfy all three labels, the
# learner settles on the least-squares compromise
inconsistent = (
    Label(Var(t7), 0.2),
    Label(Var(t8), 0.3),
    Label(And(Var(t7), Var(t8)), 0.9),
)
out = learn(LearningProblem(fresh_pair(), inconsistent), cfg)
print("\ninconsistent instance")
print(f"  p=({out.probabilities[t7]:.4f}, {out.probabilities[t8]:.4f})  residual={out.best:.6f}")

# the same machinery runs from files: tuples + rules + labels on derived facts
data = Path(__file__).parent / "data"
inst = load_instance(data / "tuples.tsv", data / "rules.dl", data / "labels.tsv")
out = learn(LearningProblem(inst.db, inst.labels), LearnerConfig(seed=2))
print("\nextraction instance from demos/data")
for t in sorted(out.probabilities):
    print(f"  {t.relation}({','.join(map(str, t.key))}) -> {out.probabilities[t]:.4f}")
