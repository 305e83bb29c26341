"""Exact marginal probabilities of lineage formulas.

Under tuple independence the marginal of a formula is the total weight of the
possible worlds that satisfy it.  ``prob_bruteforce`` computes that sum by
enumerating worlds (the oracle).  ``prob_exact`` instead applies, recursively:

* ``P(t) = p(t)`` and ``P(!phi) = 1 - P(phi)``;
* independent-and: ``P(phi_1 & ... & phi_n) = prod P(phi_i)`` when the
  conjuncts mention pairwise disjoint tuple sets (children are grouped into
  connected components of the tuple-overlap graph first, so the rule fires on
  the groups);
* independent-or: ``P(phi_1 | ... | phi_n) = 1 - prod (1 - P(phi_i))`` under
  the same side condition;
* disjoint-or: ``P(phi | psi) = P(phi) + P(psi)`` when the disjuncts are
  pairwise inconsistent, detected syntactically: one contains the literal t
  and the other !t at its top conjunction level;
* Shannon expansion ``P(phi) = p(t) P(phi[t:=true]) + (1-p(t)) P(phi[t:=false])``
  when nothing else applies, on the tuple occurring in the most blocked
  sibling subformulas (ties: smallest TupleId), limited by
  ``InferenceConfig.shannon_budget``.

When the budget runs out, subformulas small enough for the brute-force cutoff
fall back to enumeration; otherwise ``IntractableFormulaError`` is raised.

All routines are pure; memoization is call-local on canonical subformulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    FormulaTooLargeError,
    IntractableFormulaError,
    MissingProbabilityError,
)
from .lineage import (
    FALSE,
    TRUE,
    And,
    Constant,
    LineageFormula,
    Not,
    Or,
    TupleId,
    Var,
    substitute,
    tuple_set,
)

__all__ = [
    "InferenceConfig",
    "possible_worlds",
    "prob_bruteforce",
    "prob_exact",
    "derivative",
    "flatten",
    "compile_probability",
]

DEFAULT_BRUTE_FORCE_CUTOFF = 20


@dataclass(frozen=True)
class InferenceConfig:
    """Budgets for exact inference.

    shannon_budget: maximum Shannon expansions per top-level call.
    brute_force_cutoff: largest tuple count enumerated exhaustively.
    """

    shannon_budget: int = 32
    brute_force_cutoff: int = DEFAULT_BRUTE_FORCE_CUTOFF

    def __post_init__(self):
        if self.shannon_budget < 0:
            raise ValueError("shannon_budget must be >= 0")
        if self.brute_force_cutoff < 1:
            raise ValueError("brute_force_cutoff must be >= 1")


# --- possible-worlds enumeration ---------------------------------------------


def possible_worlds(
    tuple_ids: Iterable[TupleId], p: Mapping[TupleId, float]
) -> Iterator[tuple]:
    """Yield every (world, weight) pair over the given tuples.

    Worlds are frozensets of present tuples; bit i of the enumeration index
    corresponds to the i-th tuple in sorted order.  Weights multiply p(t) for
    present and 1-p(t) for absent tuples and sum to 1 over the enumeration.
    """
    ordered = sorted(set(tuple_ids))
    probs = [float(p[t]) for t in ordered]
    n = len(ordered)
    for mask in range(1 << n):
        weight = 1.0
        present = []
        for i in range(n):
            if mask >> i & 1:
                weight *= probs[i]
                present.append(ordered[i])
            else:
                weight *= 1.0 - probs[i]
        yield frozenset(present), weight


def _eval_vectorized(phi: LineageFormula, bits: dict) -> np.ndarray:
    if isinstance(phi, Var):
        return bits[phi.tuple_id]
    if isinstance(phi, Constant):
        some = next(iter(bits.values()))
        return np.full(some.shape, phi.value, dtype=bool)
    if isinstance(phi, Not):
        return ~_eval_vectorized(phi.child, bits)
    if isinstance(phi, And):
        return np.logical_and.reduce([_eval_vectorized(c, bits) for c in phi.children])
    return np.logical_or.reduce([_eval_vectorized(c, bits) for c in phi.children])


def prob_bruteforce(
    phi: LineageFormula,
    p: Mapping[TupleId, float],
    cutoff: int = DEFAULT_BRUTE_FORCE_CUTOFF,
) -> float:
    """Marginal probability by exhaustive world enumeration.

    Refuses formulas with more than ``cutoff`` tuples.  Serves as the oracle
    that ``prob_exact`` is verified against.
    """
    ordered = sorted(tuple_set(phi))
    n = len(ordered)
    if n > cutoff:
        raise FormulaTooLargeError(
            f"formula has {n} tuples, brute-force cutoff is {cutoff}"
        )
    if n == 0:
        return 1.0 if isinstance(phi, Constant) and phi.value else 0.0
    try:
        probs = [float(p[t]) for t in ordered]
    except KeyError as exc:
        raise MissingProbabilityError(exc.args[0]) from None
    indices = np.arange(1 << n, dtype=np.int64)
    bits = {t: (indices >> i & 1).astype(bool) for i, t in enumerate(ordered)}
    weights = np.ones(1 << n, dtype=np.float64)
    for i, t in enumerate(ordered):
        weights *= np.where(bits[t], probs[i], 1.0 - probs[i])
    satisfied = _eval_vectorized(phi, bits)
    return float(weights[satisfied].sum())


# --- decomposition plans ------------------------------------------------------

# Plan nodes describe how to compute P(phi) with no further analysis.  The
# same plan backs prob_exact (interpreted with a value memo), flatten
# (reconstructed as a formula), and compile_probability (closures).


@dataclass(frozen=True)
class _ConstP:
    value: float


@dataclass(frozen=True)
class _LeafP:
    tuple_id: TupleId


@dataclass(frozen=True)
class _NotP:
    child: object


@dataclass(frozen=True)
class _IndepAndP:
    children: tuple


@dataclass(frozen=True)
class _IndepOrP:
    children: tuple


@dataclass(frozen=True)
class _SumP:
    children: tuple


@dataclass(frozen=True)
class _ShannonP:
    tuple_id: TupleId
    high: object
    low: object


@dataclass(frozen=True)
class _BruteP:
    formula: LineageFormula


def _connected_components(children: Sequence[LineageFormula]) -> list:
    """Group children into connected components of the tuple-overlap graph."""
    parent = list(range(len(children)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[TupleId, int] = {}
    for i, child in enumerate(children):
        for t in child._tuples:
            if t in owner:
                ri, rj = find(i), find(owner[t])
                if ri != rj:
                    parent[ri] = rj
            else:
                owner[t] = i
    groups: dict[int, list] = {}
    for i, child in enumerate(children):
        groups.setdefault(find(i), []).append(child)
    return list(groups.values())


def _top_literals(phi: LineageFormula) -> dict:
    """Map tuple -> sign for literals at the top conjunction level, else {}."""
    if isinstance(phi, Var):
        return {phi.tuple_id: 1}
    if isinstance(phi, Not) and isinstance(phi.child, Var):
        return {phi.child.tuple_id: -1}
    if isinstance(phi, And):
        out = {}
        for c in phi.children:
            if isinstance(c, Var):
                out[c.tuple_id] = 1
            elif isinstance(c, Not) and isinstance(c.child, Var):
                out[c.child.tuple_id] = -1
        return out
    return {}


def _pairwise_event_disjoint(children: Sequence[LineageFormula]) -> bool:
    literal_maps = [_top_literals(c) for c in children]
    for i in range(len(children)):
        for j in range(i + 1, len(children)):
            a, b = literal_maps[i], literal_maps[j]
            if len(b) < len(a):
                a, b = b, a
            if not any(-sign == b.get(t) for t, sign in a.items()):
                return False
    return True


def _shannon_tuple(children: Sequence[LineageFormula]) -> TupleId:
    counts: dict[TupleId, int] = {}
    for child in children:
        for t in child._tuples:
            counts[t] = counts.get(t, 0) + 1
    best = max(counts.items(), key=lambda item: (item[1], ))
    top = best[1]
    return min(t for t, c in counts.items() if c == top)


class _PlanBuilder:
    def __init__(self, cfg: InferenceConfig):
        self.cfg = cfg
        self.budget = cfg.shannon_budget
        self.memo: dict[LineageFormula, object] = {}

    def build(self, phi: LineageFormula):
        cached = self.memo.get(phi)
        if cached is not None:
            return cached
        plan = self._analyze(phi)
        self.memo[phi] = plan
        return plan

    def _analyze(self, phi):
        if isinstance(phi, Constant):
            return _ConstP(1.0 if phi.value else 0.0)
        if isinstance(phi, Var):
            return _LeafP(phi.tuple_id)
        if isinstance(phi, Not):
            return _NotP(self.build(phi.child))
        components = _connected_components(phi.children)
        if len(components) > 1:
            if isinstance(phi, And):
                parts = tuple(self.build(And(*group)) for group in components)
                return _IndepAndP(parts)
            parts = tuple(self.build(Or(*group)) for group in components)
            return _IndepOrP(parts)
        if isinstance(phi, Or) and _pairwise_event_disjoint(phi.children):
            return _SumP(tuple(self.build(c) for c in phi.children))
        return self._expand(phi)

    def _expand(self, phi):
        if self.budget > 0:
            self.budget -= 1
            t = _shannon_tuple(phi.children)
            high = self.build(substitute(phi, t, True))
            low = self.build(substitute(phi, t, False))
            return _ShannonP(t, high, low)
        if len(phi._tuples) <= self.cfg.brute_force_cutoff:
            return _BruteP(phi)
        raise IntractableFormulaError(
            f"Shannon budget exhausted and subformula has {len(phi._tuples)} tuples "
            f"(brute-force cutoff {self.cfg.brute_force_cutoff})"
        )


def _eval_plan(plan, p: Mapping, memo: dict, cutoff: int) -> float:
    cached = memo.get(id(plan))
    if cached is not None:
        return cached
    if isinstance(plan, _ConstP):
        value = plan.value
    elif isinstance(plan, _LeafP):
        value = float(p[plan.tuple_id])
    elif isinstance(plan, _NotP):
        value = 1.0 - _eval_plan(plan.child, p, memo, cutoff)
    elif isinstance(plan, _IndepAndP):
        value = 1.0
        for child in plan.children:
            value *= _eval_plan(child, p, memo, cutoff)
    elif isinstance(plan, _IndepOrP):
        value = 1.0
        for child in plan.children:
            value *= 1.0 - _eval_plan(child, p, memo, cutoff)
        value = 1.0 - value
    elif isinstance(plan, _SumP):
        value = sum(_eval_plan(child, p, memo, cutoff) for child in plan.children)
    elif isinstance(plan, _ShannonP):
        x = float(p[plan.tuple_id])
        value = x * _eval_plan(plan.high, p, memo, cutoff) + (1.0 - x) * _eval_plan(
            plan.low, p, memo, cutoff
        )
    else:
        value = prob_bruteforce(plan.formula, p, cutoff)
    memo[id(plan)] = value
    return value


def prob_exact(
    phi: LineageFormula,
    p: Mapping[TupleId, float],
    cfg: InferenceConfig | None = None,
) -> float:
    """Exact marginal probability via the decomposition rules above."""
    cfg = cfg or InferenceConfig()
    plan = _PlanBuilder(cfg).build(phi)
    try:
        return _eval_plan(plan, p, {}, max(cfg.brute_force_cutoff, 1))
    except KeyError as exc:
        raise MissingProbabilityError(exc.args[0]) from None


def derivative(
    phi: LineageFormula,
    tuple_id: TupleId,
    p: Mapping[TupleId, float],
    cfg: InferenceConfig | None = None,
) -> float:
    """Partial derivative of P(phi) with respect to p(tuple_id).

    P is multilinear, so the derivative is
    ``P(phi[t:=true]) - P(phi[t:=false])``; tuples absent from phi yield 0.
    """
    if tuple_id not in tuple_set(phi):
        return 0.0
    cfg = cfg or InferenceConfig()
    high = prob_exact(substitute(phi, tuple_id, True), p, cfg)
    low = prob_exact(substitute(phi, tuple_id, False), p, cfg)
    return high - low


def flatten(phi: LineageFormula, cfg: InferenceConfig | None = None) -> LineageFormula:
    """Rewrite phi into an equivalent form needing no Shannon expansions.

    Shannon steps are materialized as ``(t & phi[t:=true]) | (!t & phi[t:=false])``,
    which the decomposition rules handle directly.  When the budget runs out
    the remaining subformulas are left as they are (best effort).
    """
    cfg = cfg or InferenceConfig()
    builder = _PlanBuilder(cfg)
    try:
        plan = builder.build(phi)
    except IntractableFormulaError:
        return phi
    return _plan_formula(plan, {})


def _plan_formula(plan, memo) -> LineageFormula:
    cached = memo.get(id(plan))
    if cached is not None:
        return cached
    if isinstance(plan, _ConstP):
        out = TRUE if plan.value else FALSE
    elif isinstance(plan, _LeafP):
        out = Var(plan.tuple_id)
    elif isinstance(plan, _NotP):
        out = Not(_plan_formula(plan.child, memo))
    elif isinstance(plan, _IndepAndP):
        out = And(*(_plan_formula(c, memo) for c in plan.children))
    elif isinstance(plan, (_IndepOrP, _SumP)):
        out = Or(*(_plan_formula(c, memo) for c in plan.children))
    elif isinstance(plan, _ShannonP):
        head = Var(plan.tuple_id)
        out = Or(
            And(head, _plan_formula(plan.high, memo)),
            And(Not(head), _plan_formula(plan.low, memo)),
        )
    else:
        out = plan.formula
    memo[id(plan)] = out
    return out


def compile_probability(
    phi: LineageFormula, cfg: InferenceConfig | None = None
) -> Callable[[Mapping[TupleId, float]], float]:
    """Compile P(phi) into a closure for repeated evaluation.

    The closure evaluates the multilinear polynomial directly from a
    probability map; missing tuples surface as KeyError.  Because P is
    multilinear, calling the closure with p(t) pinned to 0 and 1 yields the
    exact partial derivative as the difference.
    """
    cfg = cfg or InferenceConfig()
    plan = _PlanBuilder(cfg).build(phi)
    return _compile_plan(plan, {}, max(cfg.brute_force_cutoff, 1))


def _compile_plan(plan, memo, cutoff):
    cached = memo.get(id(plan))
    if cached is not None:
        return cached
    if isinstance(plan, _ConstP):
        value = plan.value

        def fn(p, _v=value):
            return _v

    elif isinstance(plan, _LeafP):
        t = plan.tuple_id

        def fn(p, _t=t):
            return p[_t]

    elif isinstance(plan, _NotP):
        child = _compile_plan(plan.child, memo, cutoff)

        def fn(p, _c=child):
            return 1.0 - _c(p)

    elif isinstance(plan, _IndepAndP):
        parts = tuple(_compile_plan(c, memo, cutoff) for c in plan.children)

        def fn(p, _parts=parts):
            out = 1.0
            for part in _parts:
                out *= part(p)
            return out

    elif isinstance(plan, _IndepOrP):
        parts = tuple(_compile_plan(c, memo, cutoff) for c in plan.children)

        def fn(p, _parts=parts):
            out = 1.0
            for part in _parts:
                out *= 1.0 - part(p)
            return 1.0 - out

    elif isinstance(plan, _SumP):
        parts = tuple(_compile_plan(c, memo, cutoff) for c in plan.children)

        def fn(p, _parts=parts):
            out = 0.0
            for part in _parts:
                out += part(p)
            return out

    elif isinstance(plan, _ShannonP):
        t = plan.tuple_id
        high = _compile_plan(plan.high, memo, cutoff)
        low = _compile_plan(plan.low, memo, cutoff)

        def fn(p, _t=t, _hi=high, _lo=low):
            x = p[_t]
            return x * _hi(p) + (1.0 - x) * _lo(p)

    else:
        formula = plan.formula

        def fn(p, _f=formula, _cut=cutoff):
            return prob_bruteforce(_f, p, _cut)

    memo[id(plan)] = fn
    return fn
