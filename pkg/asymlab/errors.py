class AsymlabError(Exception):
    """
    Base class of every error raised by asymlab.

    The operational layer (run blocks, CLI) catches this class, marks the block
    incomplete and maps it to exit code 1.
    """
    pass


class InvalidParams(AsymlabError):
    pass


class StructureViolation(AsymlabError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class OutOfRange(AsymlabError):
    pass


class NoConvergence(AsymlabError):
    def __init__(self, message, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = history or []


class Inconclusive(AsymlabError):
    def __init__(self, message, exponent=None, partial_integrals=None):
        super().__init__(message)
        self.exponent = exponent
        self.partial_integrals = partial_integrals or []


class DimensionMismatch(AsymlabError):
    pass


class InvalidIdealPoint(AsymlabError):
    pass


class NonpositiveRadius(AsymlabError):
    pass


class NotRemovableType(AsymlabError):
    pass


class NoAlpha(AsymlabError):
    pass


class BoundedOperator(AsymlabError):
    pass


class TooFewNodes(AsymlabError):
    pass


class DomainExceeded(AsymlabError):
    pass


class StencilOutOfDomain(AsymlabError):
    pass


class DegenerateGradient(AsymlabError):
    pass


class IllConditioned(AsymlabError):
    pass


class BoundaryOrderViolated(AsymlabError):
    def __init__(self, message, worst=None):
        super().__init__(message)
        self.worst = worst


class ParseError(AsymlabError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class ConfigValidationError(AsymlabError):
    """Carries every problem found in a config, not only the first one."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
