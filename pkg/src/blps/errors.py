"""Exception types shared across the toolchain.

Every error carries a short ``category`` used by the CLI to build the
``error: <category>: <detail>`` line and to pick an exit code.
"""

from __future__ import annotations


class BlpsError(Exception):
    category = "error"


class ParseError(BlpsError):
    category = "parse"

    def __init__(self, message: str, span=None, expected: tuple[str, ...] = ()):
        self.message = message
        self.span = span
        self.expected = tuple(expected)
        where = f"{span}: " if span is not None else ""
        super().__init__(f"{where}{message}")


class DuplicateLabel(ParseError):
    def __init__(self, index: str, span=None):
        self.index = index
        super().__init__(f"duplicate label {index}", span)


class UnknownStatement(ParseError):
    def __init__(self, word: str, span=None):
        self.word = word
        super().__init__(f"unknown statement {word!r}", span)


class InvalidModel(BlpsError):
    category = "model"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class NotFound(BlpsError, KeyError):
    category = "lookup"

    def __init__(self, index):
        self.index = index
        super().__init__(f"not found: {index}")

    def __str__(self) -> str:
        return self.args[0]


class UnknownService(NotFound):
    pass


class UnknownIndex(BlpsError):
    category = "contract"

    def __init__(self, index):
        self.index = index
        super().__init__(f"unknown index {index}")


class UnknownVariable(BlpsError):
    category = "trace"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown variable {name}")


class UnresolvedInvoke(BlpsError):
    category = "flow"

    def __init__(self, target: str, source=None):
        self.target = target
        self.source = source
        super().__init__(f"invoke of unknown service {target}" + (f" from {source}" if source else ""))


class ContractError(ParseError):
    category = "contract"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        BlpsError.__init__(self, prefix + message)
        self.message = message
        self.span = None
        self.expected = ()


class InvalidBudget(ContractError):
    pass


class XmlError(BlpsError):
    category = "schema"

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        self.position = position
        super().__init__(message if position is None else f"{message} at line {position[0]}, column {position[1]}")


class SchemaError(BlpsError):
    category = "schema"

    def __init__(self, element: str, reason: str):
        self.element = element
        self.reason = reason
        super().__init__(f"<{element}>: {reason}")


class DanglingIndex(SchemaError):
    def __init__(self, index: str, prop: str):
        self.index = index
        super().__init__("property", f"{prop} lists {index}, which is not in the body")


class IntegrationError(BlpsError):
    category = "integration"


class ArityMismatch(IntegrationError):
    pass


class CycleIntroduced(IntegrationError):
    pass


class IoError(BlpsError, OSError):
    category = "io"
