"""Exception types shared across the package."""


class ParseError(ValueError):
    """A text file could not be parsed. Carries the path and 1-based line number."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
        if line is not None:
            loc += f"line {line}: "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


class SchemaError(ValueError):
    """A structured document is missing required fields or has the wrong version."""


class NoModelFound(RuntimeError):
    """RANSAC finished without any candidate reaching the inlier minimum."""
