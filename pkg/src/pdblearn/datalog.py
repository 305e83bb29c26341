"""Safe non-recursive Datalog with lineage-producing grounding.

Rule syntax, one rule per line, ``%`` starts a comment::

    WonPrize(S, O) :- WonPrizeExtraction(S, O, Pid, Did), UsingPattern(Pid, P), FromDomain(Did, D).
    Conflict(X) :- Claim(X, V1), Claim(X, V2), V1 != V2, !Retracted(X).

Tokens starting with an uppercase letter (or ``_``) are variables; lowercase
identifiers, integers, and double-quoted strings are constants.  ``!`` negates
a literal.  Comparisons use ``=  !=  <  <=  >  >=`` over integers or strings
(lexicographic); comparing an integer against a string is an error.

Safety requires at least one positive literal per rule and every variable of
the head, of negated literals, and of comparisons to occur in a positive body
literal.  Programs must be non-recursive: the dependency graph over derived
relations is acyclic; grounding proceeds bottom-up along a topological order.

Grounding semantics over a probabilistic database:

* a positive literal contributes the matched tuple's event (base tuple) or
  the matched derived tuple's lineage;
* a negated literal with a match contributes the negation of that lineage;
  with no match it contributes the constant true (closed world);
* each rule instantiation contributes the conjunction of its body lineages,
  and instantiations deriving the same head tuple merge by disjunction.

Derived tuples whose lineage folds to the constant false (derivable in no
world) are dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .database import ProbabilisticDatabase
from .errors import (
    ArityError,
    ComparisonTypeError,
    CyclicProgramError,
    ParseError,
    SafetyError,
    UnknownRelationError,
)
from .lineage import (
    And,
    FALSE,
    LineageFormula,
    Not,
    Or,
    TupleId,
    Var,
    args_sort_key,
    format_arg,
)

__all__ = [
    "Variable",
    "Literal",
    "Comparison",
    "DeductionRule",
    "DeductionProgram",
    "DerivedTuple",
    "parse_rule",
    "parse_program",
    "format_rule",
    "format_program",
    "ground",
    "index_derived",
]

_COMPARATORS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Literal:
    relation: str
    args: tuple
    negated: bool = False

    def variables(self) -> set:
        return {a for a in self.args if isinstance(a, Variable)}

    def __str__(self):
        body = ", ".join(_format_term(a) for a in self.args)
        return f"{'!' if self.negated else ''}{self.relation}({body})"


@dataclass(frozen=True)
class Comparison:
    op: str
    left: object
    right: object

    def variables(self) -> set:
        return {a for a in (self.left, self.right) if isinstance(a, Variable)}

    def __str__(self):
        return f"{_format_term(self.left)} {self.op} {_format_term(self.right)}"


def _format_term(term) -> str:
    if isinstance(term, Variable):
        return term.name
    if isinstance(term, int):
        return str(term)
    # string constants must not re-parse as variables or integers
    if re.fullmatch(r"[a-z][A-Za-z0-9_]*", term):
        return term
    return format_arg(term) if format_arg(term).startswith('"') else f'"{term}"'


@dataclass(frozen=True)
class DeductionRule:
    head: Literal
    body: tuple  # Literals and Comparisons in source order

    @property
    def positive(self) -> tuple:
        return tuple(b for b in self.body if isinstance(b, Literal) and not b.negated)

    @property
    def negative(self) -> tuple:
        return tuple(b for b in self.body if isinstance(b, Literal) and b.negated)

    @property
    def comparisons(self) -> tuple:
        return tuple(b for b in self.body if isinstance(b, Comparison))

    def __str__(self):
        return format_rule(self)


@dataclass(frozen=True)
class DeductionProgram:
    rules: tuple

    @property
    def derived_relations(self) -> frozenset:
        return frozenset(rule.head.relation for rule in self.rules)

    def stratum_order(self) -> tuple:
        """Derived relations in dependency order (validated acyclic)."""
        return _topo_order(self.rules)

    def __str__(self):
        return format_program(self)


@dataclass(frozen=True)
class DerivedTuple:
    relation: str
    args: tuple
    lineage: LineageFormula

    @property
    def name(self) -> TupleId:
        """The derived tuple's identity in label files: relation(args)."""
        return TupleId(self.relation, self.args)

    def __str__(self):
        return f"{self.name}"


# --- parsing ------------------------------------------------------------------

_RULE_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_RULE_INT = re.compile(r"-?[0-9]+")


class _RuleScanner:
    def __init__(self, text: str, line_no: int = 1):
        self.text = text
        self.pos = 0
        self.line_no = line_no

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.line_no, self.pos + 1)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self, ahead: int = 0) -> str:
        self.skip_ws()
        i = self.pos + ahead
        return self.text[i] if i < len(self.text) else ""

    def take(self, literal: str) -> bool:
        self.skip_ws()
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str):
        if not self.take(literal):
            raise self.error(f"expected {literal!r}")

    def regex(self, pattern: re.Pattern):
        self.skip_ws()
        m = pattern.match(self.text, self.pos)
        if m is None:
            return None
        self.pos = m.end()
        return m.group(0)

    def quoted(self) -> str:
        self.pos += 1
        out = []
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == "\\" and self.pos + 1 < len(self.text):
                out.append(self.text[self.pos + 1])
                self.pos += 2
                continue
            if c == '"':
                self.pos += 1
                return "".join(out)
            out.append(c)
            self.pos += 1
        raise self.error("unterminated string literal")

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)


def _parse_term(scanner: _RuleScanner):
    c = scanner.peek()
    if c == '"':
        return scanner.quoted()
    token = scanner.regex(_RULE_INT)
    if token is not None:
        return int(token)
    name = scanner.regex(_RULE_IDENT)
    if name is None:
        raise scanner.error("expected a term")
    if name[0].isupper() or name[0] == "_":
        return Variable(name)
    return name


def _parse_literal(scanner: _RuleScanner, negated: bool) -> Literal:
    name = scanner.regex(_RULE_IDENT)
    if name is None:
        raise scanner.error("expected a relation name")
    scanner.expect("(")
    args = []
    if scanner.peek() != ")":
        while True:
            args.append(_parse_term(scanner))
            if not scanner.take(","):
                break
    scanner.expect(")")
    return Literal(name, tuple(args), negated)


def _parse_body_item(scanner: _RuleScanner):
    if scanner.peek() == "!" and scanner.peek(1) != "=":
        scanner.take("!")
        return _parse_literal(scanner, negated=True)
    # could be a literal or the left side of a comparison
    start = scanner.pos
    term = _parse_term(scanner)
    if scanner.peek() == "(" and not isinstance(term, int):
        scanner.pos = start
        return _parse_literal(scanner, negated=False)
    for op in ("!=", "<=", ">=", "<", ">", "="):
        if scanner.take(op):
            right = _parse_term(scanner)
            return Comparison(op, term, right)
    raise scanner.error("expected '(' for a literal or a comparison operator")


def parse_rule(text: str, line_no: int = 1) -> DeductionRule:
    """Parse a single ``Head(...) :- Body.`` rule."""
    scanner = _RuleScanner(text, line_no)
    head = _parse_literal(scanner, negated=False)
    scanner.skip_ws()
    if not scanner.take(":-"):
        raise scanner.error("expected ':-' after the rule head")
    body = [_parse_body_item(scanner)]
    while scanner.take(","):
        body.append(_parse_body_item(scanner))
    scanner.expect(".")
    if not scanner.at_end():
        raise scanner.error("trailing input after rule")
    rule = DeductionRule(head, tuple(body))
    _check_safety(rule, line_no)
    return rule


def _check_safety(rule: DeductionRule, line_no: int | None = None):
    if not rule.positive:
        raise SafetyError(
            f"rule for {rule.head.relation} has no positive body literal"
        )
    bound = set()
    for literal in rule.positive:
        bound |= literal.variables()
    demanded = rule.head.variables()
    for literal in rule.negative:
        demanded |= literal.variables()
    for comparison in rule.comparisons:
        demanded |= comparison.variables()
    unbound = sorted(v.name for v in demanded - bound)
    if unbound:
        raise SafetyError(
            f"unsafe rule for {rule.head.relation}: "
            f"variable(s) {', '.join(unbound)} not bound by a positive literal"
        )


def parse_program(text: str) -> DeductionProgram:
    """Parse a rule file: one rule per line, ``%`` comments, blank lines ignored."""
    rules = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        rules.append(parse_rule(line, line_no))
    program = DeductionProgram(tuple(rules))
    _topo_order(program.rules)  # validates non-recursion
    _check_arities(program.rules)
    return program


def _check_arities(rules: Sequence[DeductionRule]):
    arity: dict[str, int] = {}
    for rule in rules:
        for literal in (rule.head, *rule.positive, *rule.negative):
            seen = arity.setdefault(literal.relation, len(literal.args))
            if seen != len(literal.args):
                raise ArityError(
                    f"relation {literal.relation} used with arity {len(literal.args)} "
                    f"and {seen}"
                )


def _topo_order(rules: Sequence[DeductionRule]) -> tuple:
    derived = {rule.head.relation for rule in rules}
    deps: dict[str, set] = {rel: set() for rel in derived}
    for rule in rules:
        for literal in (*rule.positive, *rule.negative):
            if literal.relation in derived:
                deps[rule.head.relation].add(literal.relation)
    order = []
    ready = sorted(rel for rel, below in deps.items() if not below)
    remaining = {rel: set(below) for rel, below in deps.items()}
    while ready:
        rel = ready.pop(0)
        order.append(rel)
        for above, below in remaining.items():
            if rel in below:
                below.discard(rel)
                if not below and above not in order and above not in ready:
                    ready.append(above)
        ready.sort()
    if len(order) != len(derived):
        cycle = sorted(rel for rel, below in remaining.items() if below)
        raise CyclicProgramError(
            f"recursive program: cycle through relation(s) {', '.join(cycle)}"
        )
    return tuple(order)


def format_rule(rule: DeductionRule) -> str:
    body = ", ".join(str(item) for item in rule.body)
    return f"{rule.head} :- {body}."


def format_program(program: DeductionProgram) -> str:
    return "\n".join(format_rule(rule) for rule in program.rules) + "\n"


# --- grounding ----------------------------------------------------------------


def ground(program: DeductionProgram, db: ProbabilisticDatabase) -> tuple:
    """Bottom-up grounding; returns DerivedTuples sorted by relation and arguments."""
    derived_relations = program.derived_relations
    order = program.stratum_order()
    _validate_against_db(program, db, derived_relations)

    # rows per relation: ground args -> lineage
    base_rows: dict[str, dict] = {}
    for t in db.tuples:
        base_rows.setdefault(t.relation, {})[t.key] = Var(t)
    derived_rows: dict[str, dict] = {rel: {} for rel in derived_relations}

    def rows_for(relation: str) -> dict:
        if relation in derived_relations:
            return derived_rows[relation]
        return base_rows.get(relation, {})

    rules_by_head: dict[str, list] = {}
    for rule in program.rules:
        rules_by_head.setdefault(rule.head.relation, []).append(rule)

    for relation in order:
        collected: dict[tuple, list] = {}
        for rule in rules_by_head[relation]:
            for theta, parts in _instantiate(rule, rows_for):
                head_args = tuple(_apply(theta, a) for a in rule.head.args)
                conjunct = And(*parts)
                if conjunct is FALSE:
                    continue
                collected.setdefault(head_args, []).append(conjunct)
        for args in sorted(collected, key=args_sort_key):
            formula = Or(*collected[args])
            if formula is FALSE:
                continue
            derived_rows[relation][args] = formula

    out = []
    for relation in sorted(derived_relations):
        for args in sorted(derived_rows[relation], key=args_sort_key):
            out.append(DerivedTuple(relation, args, derived_rows[relation][args]))
    return tuple(out)


def _validate_against_db(program, db, derived_relations):
    for rule in program.rules:
        for literal in (*rule.positive, *rule.negative):
            if literal.relation in derived_relations:
                continue
            if literal.relation not in db.relations:
                raise UnknownRelationError(
                    f"relation {literal.relation} is neither stored nor derived"
                )
            if db.arity(literal.relation) != len(literal.args):
                raise ArityError(
                    f"relation {literal.relation} has arity {db.arity(literal.relation)}, "
                    f"used with {len(literal.args)}"
                )


def _apply(theta: Mapping, term):
    if isinstance(term, Variable):
        return theta[term]
    return term


def _instantiate(rule: DeductionRule, rows_for):
    """Yield (theta, lineage parts) for every satisfied body instantiation."""
    bindings = [({}, [])]
    for literal in rule.positive:
        rows = rows_for(literal.relation)
        next_bindings = []
        keys = sorted(rows, key=args_sort_key)
        for theta, parts in bindings:
            for key in keys:
                theta2 = _unify(literal.args, key, theta)
                if theta2 is not None:
                    next_bindings.append((theta2, parts + [rows[key]]))
        bindings = next_bindings
        if not bindings:
            return
    for theta, parts in bindings:
        if not all(_holds(c, theta) for c in rule.comparisons):
            continue
        for literal in rule.negative:
            args = tuple(_apply(theta, a) for a in literal.args)
            match = rows_for(literal.relation).get(args)
            if match is not None:
                parts = parts + [Not(match)]
        yield theta, parts


def _unify(terms, values, theta):
    out = None
    for term, value in zip(terms, values):
        if isinstance(term, Variable):
            bound = theta.get(term) if out is None else out.get(term)
            if bound is None:
                if out is None:
                    out = dict(theta)
                out[term] = value
            elif bound != value or type(bound) is not type(value):
                return None
        elif term != value or type(term) is not type(value):
            return None
    return theta if out is None else out


def _holds(comparison: Comparison, theta) -> bool:
    left = _apply(theta, comparison.left)
    right = _apply(theta, comparison.right)
    if isinstance(left, int) != isinstance(right, int):
        raise ComparisonTypeError(
            f"cannot compare {left!r} with {right!r} in '{comparison}'"
        )
    return _COMPARATORS[comparison.op](left, right)


def index_derived(derived: Sequence[DerivedTuple]) -> dict:
    """Index grounding output by (relation, args) for label lookups."""
    return {(d.relation, d.args): d for d in derived}
