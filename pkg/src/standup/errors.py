class ParseError(ValueError):
    """Malformed input file; carries the source name and 1-based line number."""

    def __init__(self, source: str, line: int, message: str):
        self.source = source
        self.line = line
        self.message = message
        super().__init__(f"{source}:{line}: {message}")


class ReplayMismatch(ValueError):
    """Trace header does not match the current schema, scripts or configuration."""
