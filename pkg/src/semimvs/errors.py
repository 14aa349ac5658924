"""Exception types shared across the package."""


class MVSError(Exception):
    """Base class for data errors raised by semimvs."""


class BehindCameraError(MVSError, ValueError):
    """A projected point lands at non-positive depth or is not finite."""


class NoSupervisionError(MVSError, ValueError):
    """A ground-truth depth map has no valid (> 0) pixels."""


class ParseError(MVSError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
