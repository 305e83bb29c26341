"""Reading and writing the tab-separated instance files.

Formats (``%`` starts a comment line, blank lines are ignored):

* tuples file: ``relation<TAB>arg...<TAB>probability`` with ``?`` in the last
  column marking a learnable tuple.  All-digit arguments are read as ints.
* rules file: one deduction rule per line, as accepted by the rule parser.
* labels file: ``Q<TAB>relation(args)<TAB>target`` referencing a derived
  tuple of the rules, or ``F<TAB>formula<TAB>target`` with an explicit
  lineage formula over base tuples.
* trace file: CSV with header ``outer_iter,objective,elapsed_ms``.
* probabilities file: ``relation<TAB>arg...<TAB>probability``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .database import ProbabilisticDatabase
from .datalog import DeductionProgram, ground, index_derived, parse_program
from .errors import DanglingReferenceError, ParseError
from .learning import Label
from .lineage import (
    And,
    LineageFormula,
    Not,
    Or,
    TupleId,
    Var,
    format_formula,
    parse_arg_token,
    parse_formula,
    parse_tuple_id,
    tuple_set,
)

__all__ = [
    "load_tuples",
    "save_tuples",
    "tuples_text",
    "load_rules",
    "save_rules",
    "load_labels",
    "save_labels",
    "save_label_refs",
    "load_probabilities",
    "save_probabilities",
    "probabilities_text",
    "write_trace",
    "expand_derived",
    "Instance",
    "load_instance",
]


def _data_lines(path):
    text = Path(path).read_text(encoding="utf-8")
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("%"):
            continue
        yield n, line


def load_tuples(path) -> ProbabilisticDatabase:
    db = ProbabilisticDatabase()
    for n, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) < 2:
            raise ParseError("expected relation, arguments, probability", line=n)
        relation, *args, last = fields
        tid = TupleId(relation, tuple(parse_arg_token(a) for a in args))
        if last.strip() == "?":
            db.add(tid, learnable=True)
        else:
            try:
                prob = float(last)
            except ValueError:
                raise ParseError(f"bad probability {last!r}", line=n) from None
            if not 0.0 <= prob <= 1.0:
                raise ParseError(f"probability {prob} outside [0, 1]", line=n)
            db.add(tid, prob)
    return db


def tuples_text(db: ProbabilisticDatabase) -> str:
    lines = []
    for t in db:
        last = f"{db.probability(t):.17g}" if db.has_probability(t) else "?"
        lines.append("\t".join([t.relation, *map(str, t.key), last]))
    return "".join(line + "\n" for line in lines)


def save_tuples(db: ProbabilisticDatabase, path) -> None:
    Path(path).write_text(tuples_text(db), encoding="utf-8")


def load_rules(path) -> DeductionProgram:
    return parse_program(Path(path).read_text(encoding="utf-8"))


def save_rules(program, path) -> None:
    text = program if isinstance(program, str) else str(program)
    if text and not text.endswith("\n"):
        text += "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_labels(
    path,
    db: ProbabilisticDatabase,
    program: DeductionProgram | None = None,
    derived: Mapping | None = None,
) -> tuple:
    """Read labels, resolving Q rows against the rules' derived tuples."""
    if derived is None and program is not None:
        derived = index_derived(ground(program, db))
    labels = []
    for n, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError("expected kind, reference, target", line=n)
        kind, ref, raw_target = fields
        try:
            target = float(raw_target)
        except ValueError:
            raise ParseError(f"bad target {raw_target!r}", line=n) from None
        if kind == "Q":
            if derived is None:
                raise DanglingReferenceError(
                    f"label line {n} references a derived tuple but no rules were given"
                )
            tid = parse_tuple_id(ref)
            hit = derived.get((tid.relation, tid.key))
            if hit is None:
                raise DanglingReferenceError(
                    f"label line {n}: {ref} is not derived by the rules"
                )
            labels.append(Label(hit.lineage, target))
        elif kind == "F":
            formula = parse_formula(ref)
            unknown = tuple_set(formula) - db.tuples
            if unknown:
                raise DanglingReferenceError(
                    f"label line {n} references tuple(s) not in the database: "
                    f"{sorted(unknown)[:3]}"
                )
            labels.append(Label(formula, target))
        else:
            raise ParseError(f"unknown label kind {kind!r}, expected Q or F", line=n)
    return tuple(labels)


def save_labels(labels: Sequence[Label], path) -> None:
    lines = [
        "\t".join(["F", format_formula(lab.formula), f"{lab.target:.17g}"])
        for lab in labels
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def save_label_refs(refs: Sequence[tuple], path) -> None:
    """Write Q-style label rows from (derived name text, target) pairs."""
    lines = ["\t".join(["Q", name, f"{target:.17g}"]) for name, target in refs]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_probabilities(path) -> dict:
    out = {}
    for n, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) < 2:
            raise ParseError("expected relation, arguments, probability", line=n)
        relation, *args, last = fields
        try:
            out[TupleId(relation, tuple(parse_arg_token(a) for a in args))] = float(last)
        except ValueError:
            raise ParseError(f"bad probability {last!r}", line=n) from None
    return out


def probabilities_text(probabilities: Mapping[TupleId, float]) -> str:
    lines = [
        "\t".join([t.relation, *map(str, t.key), f"{probabilities[t]:.17g}"])
        for t in sorted(probabilities)
    ]
    return "".join(line + "\n" for line in lines)


def save_probabilities(probabilities: Mapping[TupleId, float], path) -> None:
    Path(path).write_text(probabilities_text(probabilities), encoding="utf-8")


def write_trace(trace: Sequence[tuple], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["outer_iter", "objective", "elapsed_ms"])
        for outer, objective, ms in trace:
            writer.writerow([outer, f"{objective:.17g}", f"{ms:.3f}"])


def expand_derived(phi: LineageFormula, derived: Mapping) -> LineageFormula:
    """Replace references to derived tuples with their lineage."""
    if isinstance(phi, Var):
        hit = derived.get((phi.tuple_id.relation, phi.tuple_id.key))
        return hit.lineage if hit is not None else phi
    if isinstance(phi, Not):
        return Not(expand_derived(phi.child, derived))
    if isinstance(phi, And):
        return And(*(expand_derived(c, derived) for c in phi.children))
    if isinstance(phi, Or):
        return Or(*(expand_derived(c, derived) for c in phi.children))
    return phi


@dataclass
class Instance:
    db: ProbabilisticDatabase
    program: DeductionProgram | None
    labels: tuple


def load_instance(tuples_path, rules_path=None, labels_path=None) -> Instance:
    db = load_tuples(tuples_path)
    program = load_rules(rules_path) if rules_path else None
    labels = load_labels(labels_path, db, program) if labels_path else ()
    return Instance(db=db, program=program, labels=labels)
