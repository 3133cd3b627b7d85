"""Exception types shared across modules."""

from __future__ import annotations


class FormatError(ValueError):
    """A file or stream violates its format; carries the 1-based line number when known."""

    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class OutOfVocabularyError(KeyError):
    """A token required an embedding or id that the vocabulary does not have."""

    def __init__(self, token: str, position: int | None = None):
        self.token = token
        self.position = position
        super().__init__(token, position)

    def __str__(self) -> str:
        if self.position is None:
            return f"token {self.token!r} is not in the vocabulary"
        return f"token {self.token!r} at position {self.position} is not in the vocabulary"
