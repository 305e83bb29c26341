"""Exception hierarchy for the engine.

Everything raised on purpose derives from :class:`PdbError` so callers can
catch engine failures without also swallowing programming mistakes.
"""

from __future__ import annotations


class PdbError(Exception):
    """Base class for all engine errors."""


class ParseError(PdbError):
    """Syntax error in formula, rule, or instance-file text."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", column {col}" if col is not None else "")
        super().__init__(message + where)


class SafetyError(PdbError):
    """A rule binds a head / negated / arithmetic variable outside its positive body."""


class CyclicProgramError(PdbError):
    """The dependency graph over derived relations contains a cycle."""


class UnknownRelationError(PdbError):
    """A body literal names a relation that is neither stored nor derived."""


class ArityError(PdbError):
    """A relation is used with inconsistent argument counts."""


class ComparisonTypeError(PdbError):
    """An arithmetic predicate compares an integer with a string."""


class MissingProbabilityError(PdbError):
    """A tuple's probability was required but is not known."""

    def __init__(self, tuple_id):
        self.tuple_id = tuple_id
        super().__init__(f"no probability known for tuple {tuple_id}")


class FormulaTooLargeError(PdbError):
    """Exhaustive world enumeration was asked to exceed its variable cutoff."""


class IntractableFormulaError(PdbError):
    """Shannon budget exhausted and the residual formula exceeds the brute-force cutoff."""


class NonBooleanLabelError(PdbError):
    """The logical objective requires every label target to be exactly 0.0 or 1.0."""


class InconsistentConstraintsError(PdbError):
    """A constraint set is unsatisfiable: no possible world fulfils all of it."""


class NoEvidenceError(PdbError):
    """An incomplete tuple has zero matching complete rows for every completion."""


class DanglingReferenceError(PdbError):
    """A label or formula references a tuple that the instance does not define."""
