"""Boolean lineage formulas over base tuples.

A lineage formula records how a derived fact depends on the base tuples of a
tuple-independent probabilistic database.  Nodes are immutable and the
constructors canonicalize eagerly:

* constant folding (``!true -> false``, an ``&`` containing ``false`` -> ``false``, ...),
* double-negation elimination,
* flattening of nested conjunctions/disjunctions,
* structural deduplication of equal children,
* children sorted by a deterministic structural key.

Canonicalization is purely syntactic: ``x & !x`` stays a conjunction (its
tuple set must remain visible), no tautology or contradiction detection.

Two formulas are therefore structurally equal exactly when canonicalization
maps them to the same tree, and ``==`` / ``hash`` work on that form.

Text syntax (round-trips through :func:`parse_formula` / :func:`format_formula`)::

    formula := or
    or      := and ("|" and)*
    and     := unary ("&" unary)*
    unary   := "!" unary | atom
    atom    := "(" formula ")" | "true" | "false"
             | "#" integer                      (opaque synthetic tuple id)
             | relation "(" arg ("," arg)* ")"  (named tuple id)

Arguments are integers (all-digit tokens), bare strings, or double-quoted
strings with backslash escapes.  ``!`` binds tighter than ``&``, which binds
tighter than ``|``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import ParseError

__all__ = [
    "TupleId",
    "LineageFormula",
    "Constant",
    "TRUE",
    "FALSE",
    "Var",
    "Not",
    "And",
    "Or",
    "evaluate",
    "substitute",
    "tuples_of",
    "tuple_set",
    "independent_partition",
    "parse_formula",
    "format_formula",
]

ArgValue = "int | str"

SYNTHETIC_RELATION = "#"

_BARE_ARG = re.compile(r"[A-Za-z0-9_.+\-/:@']+")
_INT_TOKEN = re.compile(r"-?[0-9]+")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _arg_rank(value) -> tuple:
    # ints sort before strings so mixed keys still order deterministically
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise TypeError(f"tuple argument must be int or str, got {value!r}")
    if isinstance(value, int):
        return (0, "", value)
    return (1, value, 0)


@dataclass(frozen=True)
class TupleId:
    """Identity of a base tuple: a relation name plus its argument constants.

    Synthetic instances use the reserved relation ``"#"`` with a single
    integer key and print as ``#<int>``.
    """

    relation: str
    key: tuple

    def __post_init__(self):
        object.__setattr__(self, "key", tuple(self.key))
        for value in self.key:
            _arg_rank(value)
        object.__setattr__(
            self,
            "sort_key",
            (self.relation, len(self.key), tuple(_arg_rank(v) for v in self.key)),
        )

    @classmethod
    def synthetic(cls, index: int) -> "TupleId":
        return cls(SYNTHETIC_RELATION, (index,))

    @property
    def is_synthetic(self) -> bool:
        return self.relation == SYNTHETIC_RELATION

    def __lt__(self, other: "TupleId") -> bool:
        return self.sort_key < other.sort_key

    def __le__(self, other: "TupleId") -> bool:
        return self.sort_key <= other.sort_key

    def __gt__(self, other: "TupleId") -> bool:
        return self.sort_key > other.sort_key

    def __ge__(self, other: "TupleId") -> bool:
        return self.sort_key >= other.sort_key

    def __str__(self) -> str:
        if self.is_synthetic and len(self.key) == 1 and isinstance(self.key[0], int):
            return f"#{self.key[0]}"
        return f"{self.relation}({','.join(format_arg(v) for v in self.key)})"

    def __repr__(self) -> str:
        return f"TupleId({self})"


def args_sort_key(args: Iterable) -> tuple:
    """Deterministic ordering key for a tuple of int/str arguments."""
    return tuple(_arg_rank(v) for v in args)


def format_arg(value) -> str:
    """Render a tuple argument so that parsing it back preserves the value."""
    if isinstance(value, int):
        return str(value)
    if _BARE_ARG.fullmatch(value) and not _INT_TOKEN.fullmatch(value):
        return value
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def parse_arg_token(token: str):
    """Interpret a bare argument token: all-digit tokens become ints."""
    if _INT_TOKEN.fullmatch(token):
        return int(token)
    return token


class LineageFormula:
    """Base class of all formula nodes.  Use the subclasses as constructors."""

    __hash__ = None  # subclasses set a cached structural hash

    def __and__(self, other: "LineageFormula") -> "LineageFormula":
        return And(self, other)

    def __or__(self, other: "LineageFormula") -> "LineageFormula":
        return Or(self, other)

    def __invert__(self) -> "LineageFormula":
        return Not(self)

    def __str__(self) -> str:
        return format_formula(self)

    def __repr__(self) -> str:
        return f"<{format_formula(self)}>"


class Constant(LineageFormula):
    """The constants ``true`` and ``false``; use the TRUE / FALSE singletons."""

    def __new__(cls, value: bool):
        # the two singletons are created below at module load
        existing = globals().get("TRUE" if value else "FALSE")
        if existing is not None:
            return existing
        return object.__new__(cls)

    def __init__(self, value: bool):
        if hasattr(self, "value"):
            return
        self.value = bool(value)
        self._tuples = frozenset()
        self._skey = (4, self.value)
        self._hash = hash(("lineage-const", self.value))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __reduce__(self):
        return (Constant, (self.value,))


TRUE = Constant(True)
FALSE = Constant(False)


class Var(LineageFormula):
    """A single base-tuple event."""

    def __new__(cls, tuple_id: TupleId):
        if not isinstance(tuple_id, TupleId):
            raise TypeError(f"Var expects a TupleId, got {tuple_id!r}")
        self = object.__new__(cls)
        self.tuple_id = tuple_id
        self._tuples = frozenset((tuple_id,))
        self._skey = (0, tuple_id.sort_key)
        self._hash = hash(("lineage-var", tuple_id))
        return self

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, Var) and self.tuple_id == other.tuple_id

    def __reduce__(self):
        return (Var, (self.tuple_id,))


class Not(LineageFormula):
    """Negation; folds constants and double negation."""

    def __new__(cls, child: LineageFormula):
        if child is TRUE:
            return FALSE
        if child is FALSE:
            return TRUE
        if isinstance(child, Not):
            return child.child
        self = object.__new__(cls)
        self.child = child
        self._tuples = child._tuples
        self._skey = (1, child._skey)
        self._hash = hash(("lineage-not", child._hash))
        return self

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, Not) and self._hash == other._hash and self.child == other.child

    def __reduce__(self):
        return (Not, (self.child,))


def _gather(children, kind, absorbing, identity):
    """Flatten nested nodes of the same kind, fold constants, dedup.

    Returns either the absorbing constant or the sorted child tuple.  Keeps
    complementary literals as they are: x & !x stays a conjunction (so its
    tuple set is preserved), only constants are folded away.
    """
    seen = {}
    for child in children:
        stack = [child]
        while stack:
            c = stack.pop()
            if c is absorbing:
                return absorbing
            if c is identity:
                continue
            if isinstance(c, kind):
                stack.extend(c.children)
                continue
            if c._hash in seen and any(c == s for s in seen[c._hash]):
                continue
            seen.setdefault(c._hash, []).append(c)
    flat = [c for group in seen.values() for c in group]
    flat.sort(key=lambda c: c._skey)
    return tuple(flat)


class And(LineageFormula):
    """Conjunction; canonical n-ary node with sorted, deduplicated children."""

    def __new__(cls, *children: LineageFormula):
        gathered = _gather(children, And, FALSE, TRUE)
        if gathered is FALSE:
            return FALSE
        if not gathered:
            return TRUE
        if len(gathered) == 1:
            return gathered[0]
        self = object.__new__(cls)
        self.children = gathered
        self._tuples = frozenset().union(*(c._tuples for c in gathered))
        self._skey = (2, tuple(c._skey for c in gathered))
        self._hash = hash(("lineage-and",) + tuple(c._hash for c in gathered))
        return self

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, And)
            and self._hash == other._hash
            and self.children == other.children
        )

    def __reduce__(self):
        return (And, tuple(self.children))


class Or(LineageFormula):
    """Disjunction; canonical n-ary node with sorted, deduplicated children."""

    def __new__(cls, *children: LineageFormula):
        gathered = _gather(children, Or, TRUE, FALSE)
        if gathered is TRUE:
            return TRUE
        if not gathered:
            return FALSE
        if len(gathered) == 1:
            return gathered[0]
        self = object.__new__(cls)
        self.children = gathered
        self._tuples = frozenset().union(*(c._tuples for c in gathered))
        self._skey = (3, tuple(c._skey for c in gathered))
        self._hash = hash(("lineage-or",) + tuple(c._hash for c in gathered))
        return self

    __hash__ = And.__hash__

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, Or)
            and self._hash == other._hash
            and self.children == other.children
        )

    def __reduce__(self):
        return (Or, tuple(self.children))


def tuple_set(phi: LineageFormula) -> frozenset:
    """The set of TupleIds reachable through Var nodes (cached, O(1))."""
    return phi._tuples


def tuples_of(phi: LineageFormula) -> tuple:
    """The TupleIds of ``phi`` in deterministic (sorted) order."""
    return tuple(sorted(phi._tuples))


def evaluate(phi: LineageFormula, world: Iterable[TupleId]) -> bool:
    """Truth value of ``phi`` in the possible world ``world`` (a set of present tuples)."""
    if not isinstance(world, (set, frozenset)):
        world = frozenset(world)
    return _eval(phi, world)


def _eval(phi, world) -> bool:
    if isinstance(phi, Var):
        return phi.tuple_id in world
    if isinstance(phi, Constant):
        return phi.value
    if isinstance(phi, Not):
        return not _eval(phi.child, world)
    if isinstance(phi, And):
        return all(_eval(c, world) for c in phi.children)
    if isinstance(phi, Or):
        return any(_eval(c, world) for c in phi.children)
    raise TypeError(f"not a lineage formula: {phi!r}")


def substitute(phi: LineageFormula, tuple_id: TupleId, value: bool) -> LineageFormula:
    """Replace the event ``tuple_id`` by a truth constant and re-canonicalize.

    The result never mentions ``tuple_id`` and introduces no new tuples.
    """
    replacement = TRUE if value else FALSE

    def go(f):
        if tuple_id not in f._tuples:
            return f
        if isinstance(f, Var):
            return replacement
        if isinstance(f, Not):
            return Not(go(f.child))
        if isinstance(f, And):
            return And(*(go(c) for c in f.children))
        return Or(*(go(c) for c in f.children))

    return go(phi)


def independent_partition(parts: Sequence[LineageFormula]) -> bool:
    """True iff the formulas mention pairwise disjoint tuple sets."""
    total = 0
    union = set()
    for part in parts:
        total += len(part._tuples)
        union.update(part._tuples)
    return len(union) == total


# --- text syntax ------------------------------------------------------------

_PREC_OR, _PREC_AND, _PREC_UNARY = 1, 2, 3


def format_formula(phi: LineageFormula) -> str:
    """Render ``phi``; ``parse_formula`` maps the result back to ``phi``."""
    return _fmt(phi, 0)


def _fmt(phi, parent_prec: int) -> str:
    if isinstance(phi, Constant):
        return "true" if phi.value else "false"
    if isinstance(phi, Var):
        return str(phi.tuple_id)
    if isinstance(phi, Not):
        return "!" + _fmt(phi.child, _PREC_UNARY)
    if isinstance(phi, And):
        text = " & ".join(_fmt(c, _PREC_AND) for c in phi.children)
        return f"({text})" if parent_prec >= _PREC_AND else text
    if isinstance(phi, Or):
        text = " | ".join(_fmt(c, _PREC_OR) for c in phi.children)
        return f"({text})" if parent_prec >= _PREC_OR else text
    raise TypeError(f"not a lineage formula: {phi!r}")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _line_col(self) -> tuple:
        consumed = self.text[: self.pos]
        line = consumed.count("\n") + 1
        col = self.pos - (consumed.rfind("\n") + 1) + 1
        return line, col

    def error(self, message: str) -> ParseError:
        line, col = self._line_col()
        return ParseError(message, line, col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str):
        if self.peek() != char:
            raise self.error(f"expected {char!r}")
        self.pos += 1

    def match(self, char: str) -> bool:
        if self.peek() == char:
            self.pos += 1
            return True
        return False

    def regex(self, pattern: re.Pattern) -> str | None:
        self.skip_ws()
        m = pattern.match(self.text, self.pos)
        if m is None:
            return None
        self.pos = m.end()
        return m.group(0)

    def quoted(self) -> str:
        # caller saw the opening quote
        self.pos += 1
        out = []
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == "\\":
                if self.pos + 1 >= len(self.text):
                    break
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


def _parse_args(scanner: _Scanner) -> tuple:
    scanner.expect("(")
    args = []
    if scanner.peek() != ")":
        while True:
            c = scanner.peek()
            if c == '"':
                args.append(scanner.quoted())
            else:
                token = scanner.regex(_BARE_ARG)
                if token is None:
                    raise scanner.error("expected a tuple argument")
                args.append(parse_arg_token(token))
            if not scanner.match(","):
                break
    scanner.expect(")")
    return tuple(args)


def parse_tuple_id(scanner_or_text) -> TupleId:
    """Parse ``rel(arg,...)`` or ``#<int>`` into a TupleId."""
    if isinstance(scanner_or_text, str):
        scanner = _Scanner(scanner_or_text)
        tid = parse_tuple_id(scanner)
        if not scanner.at_end():
            raise scanner.error("trailing input after tuple id")
        return tid
    scanner = scanner_or_text
    if scanner.peek() == "#":
        scanner.pos += 1
        token = scanner.regex(re.compile(r"-?[0-9]+"))
        if token is None:
            raise scanner.error("expected an integer after '#'")
        return TupleId.synthetic(int(token))
    name = scanner.regex(_IDENT)
    if name is None:
        raise scanner.error("expected a relation name")
    return TupleId(name, _parse_args(scanner))


def parse_formula(text: str) -> LineageFormula:
    """Parse the textual syntax documented in the module docstring."""
    scanner = _Scanner(text)
    phi = _parse_or(scanner)
    if not scanner.at_end():
        raise scanner.error("trailing input after formula")
    return phi


def _parse_or(scanner: _Scanner) -> LineageFormula:
    parts = [_parse_and(scanner)]
    while scanner.match("|"):
        parts.append(_parse_and(scanner))
    return Or(*parts) if len(parts) > 1 else parts[0]


def _parse_and(scanner: _Scanner) -> LineageFormula:
    parts = [_parse_unary(scanner)]
    while scanner.match("&"):
        parts.append(_parse_unary(scanner))
    return And(*parts) if len(parts) > 1 else parts[0]


def _parse_unary(scanner: _Scanner) -> LineageFormula:
    if scanner.match("!"):
        return Not(_parse_unary(scanner))
    return _parse_atom(scanner)


def _parse_atom(scanner: _Scanner) -> LineageFormula:
    c = scanner.peek()
    if c == "(":
        scanner.pos += 1
        phi = _parse_or(scanner)
        scanner.expect(")")
        return phi
    if c == "#":
        return Var(parse_tuple_id(scanner))
    name = scanner.regex(_IDENT)
    if name is None:
        raise scanner.error("expected a formula atom")
    if name == "true":
        return TRUE
    if name == "false":
        return FALSE
    return Var(TupleId(name, _parse_args(scanner)))
