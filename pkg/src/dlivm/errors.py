"""Exception hierarchy shared by every layer of the engine."""


class DatalogError(Exception):
    """Base class for all engine errors."""


class ParseError(DatalogError):
    def __init__(self, message, line=None, column=None, source=None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = ""
        if line is not None:
            where = f"{source + ':' if source else ''}{line}:{column}: "
        super().__init__(f"{where}{message}")


class GroundnessError(ParseError):
    """A fact or delta entry contains a variable."""


class ArityError(DatalogError):
    def __init__(self, predicate, expected, got):
        self.predicate = predicate
        self.expected = expected
        self.got = got
        super().__init__(f"predicate {predicate} used with arity {got}, expected {expected}")


class SafetyError(DatalogError):
    def __init__(self, variable, rule):
        self.variable = variable
        self.rule = rule
        super().__init__(f"unsafe variable {variable} in rule {rule}")


class NotStratifiableError(DatalogError):
    def __init__(self, predicates):
        self.predicates = tuple(predicates)
        names = ", ".join(self.predicates)
        super().__init__(f"negation on a dependency cycle through: {names}")


class UnboundBuiltinError(DatalogError):
    """No admissible ordering binds every variable of a built-in atom."""


class EvaluationOverflow(DatalogError):
    """Built-in arithmetic left the signed 64-bit range."""


class CounterOverflow(DatalogError):
    pass


class CounterUnderflow(DatalogError):
    """A derivation counter would drop below zero.

    This only happens when the counters handed to a maintenance algorithm
    were not compatible with the program and explicit facts, so the state
    must be treated as corrupt.
    """


class InfeasibleGraph(DatalogError):
    pass
