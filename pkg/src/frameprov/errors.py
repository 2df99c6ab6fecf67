"""Exception hierarchy shared by every frameprov module."""


class FrameProvError(Exception):
    """Base class for all frameprov errors."""


class StructureError(FrameProvError, ValueError):
    """A value violates a structural invariant (lengths, counts)."""


class DimensionError(StructureError):
    """Frame dimensions are too small or do not match."""


class CapacityError(StructureError):
    """A metadata payload does not fit in one frame."""


class ParseError(FrameProvError, ValueError):
    """A binary payload or container could not be decoded."""


class BadMagicError(ParseError):
    pass


class VersionError(ParseError):
    pass


class TruncatedError(ParseError):
    pass


class PaddingError(ParseError):
    pass


class OrderingError(ParseError):
    """Snippet indices are not strictly increasing or exceed the content count."""


class LengthError(ParseError):
    """Container byte length disagrees with its header."""


class StateError(FrameProvError):
    """An operation was called in the wrong session or verifier state."""


class VeslError(FrameProvError, ValueError):
    """Base class for edit-specification problems.

    ``line`` and ``column`` are 1-based source positions when known; ``path``
    names the offending element (e.g. ``edits[2].rangeDeletionParams``).
    """

    def __init__(self, message: str, *, line: int | None = None,
                 column: int | None = None, path: str | None = None) -> None:
        self.message = message
        self.line = line
        self.column = column
        self.path = path
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if path:
            where.append(path)
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)


class VeslSyntaxError(VeslError):
    pass


class UnknownEditTypeError(VeslError):
    pass


class ParameterError(VeslError):
    """Missing, extra, or malformed edit parameters."""


class RangeError(VeslError):
    """A frame range is inverted or out of bounds."""


class EditError(FrameProvError, ValueError):
    """An edit could not be applied to a video buffer."""

    def __init__(self, message: str, *, edit_index: int | None = None) -> None:
        self.edit_index = edit_index
        super().__init__(message if edit_index is None else f"edit {edit_index}: {message}")


class UnsupportedFilterError(EditError):
    pass


class UnsupportedCodecError(EditError):
    pass


class EmptyResultError(EditError):
    pass


class KeystoreError(FrameProvError):
    pass


class DuplicateKeyError(KeystoreError):
    pass


class IntegrityError(KeystoreError):
    pass


class OutOfBoundsError(EditError):
    """A frame range does not fit the current buffer."""
