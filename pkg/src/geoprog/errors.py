"""Exception types shared across the package.

Everything user-facing derives from GeoprogError so callers (service layer,
CLI) can map domain failures to one error channel.
"""


class GeoprogError(Exception):
    """Base class for all geoprog errors."""


class ExprSyntaxError(GeoprogError):
    """Malformed expression text; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifier(ExprSyntaxError):
    """Identifier outside the expression vocabulary."""

    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class UnboundVariable(GeoprogError):
    """Evaluation hit a variable with no value in the environment."""

    def __init__(self, var):
        super().__init__(f"unbound variable {var}")
        self.var = var


class MathDomain(GeoprogError):
    """Division by zero, invalid power, or similar evaluation failure."""


class ArityMismatch(GeoprogError):
    """An equation passed to a solver had the wrong number of unknowns."""


class BudgetExceeded(GeoprogError):
    """A solving routine ran past its evaluation-count budget."""


class ProgramParseError(GeoprogError):
    """Malformed solution-program text."""


class LeadingOperand(ProgramParseError):
    """Program text began with an operand instead of an operator."""


class UnknownToken(ProgramParseError):
    """Program token matching no vocabulary class."""

    def __init__(self, token: str):
        super().__init__(f"unknown program token {token!r}")
        self.token = token


class KBFormatError(GeoprogError):
    """Malformed knowledge-base file."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)
        self.line = line
        self.field = field


class DuplicateOperator(KBFormatError):
    """Two knowledge-base records claim the same canonical operator name."""

    def __init__(self, name: str, line: int | None = None):
        super().__init__(f"duplicate operator {name!r}", line=line)
        self.name = name


class KindError(GeoprogError):
    """An annotation fact whose arguments do not fit its template."""


class TemplateMismatch(GeoprogError):
    """Clause text matching none of the nine templates."""

    def __init__(self, text: str, nearest: str):
        super().__init__(f"clause {text!r} matches no template; nearest: {nearest}")
        self.nearest = nearest


class TooManyVariables(GeoprogError):
    """More values than the eleven problem-variable slots."""


class DuplicateDeclaration(GeoprogError):
    """A problem variable declared twice in one record."""


class IndexOutOfRange(GeoprogError):
    """Problem/intermediate variable index beyond its range."""


class SymbolExhausted(GeoprogError):
    """Token replacement ran out of unused symbols of the needed class."""


class DatasetFormatError(GeoprogError):
    """Malformed dataset record; carries record id and offending field."""

    def __init__(self, record_id: str, field: str, message: str):
        super().__init__(f"record {record_id!r}, field {field!r}: {message}")
        self.record_id = record_id
        self.field = field


class MissingChoices(GeoprogError):
    """Choice-mode evaluation needs four options on every record."""

    def __init__(self, record_id: str):
        super().__init__(f"record {record_id!r} has no choice options")
        self.record_id = record_id
