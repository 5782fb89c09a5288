"""Exception types shared across the package."""


class AbeClipError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateVectorError(AbeClipError):
    """A zero-norm vector reached a cosine computation or a loader."""


class DimensionMismatchError(AbeClipError):
    """Two operands disagree on embedding dimension or length."""


class ValidationError(AbeClipError):
    """A domain object or input file violates a structural invariant."""


class BundleFormatError(ValidationError):
    """A bundle directory, manifest, or blob failed format validation."""


class PairsFileError(ValidationError):
    """A caption pairs file is malformed or inconsistent with its caption."""


class CaptionMismatchError(AbeClipError):
    """A caption structure was applied to a text encoding of a different caption."""


class MissingPhraseEntriesError(AbeClipError):
    """Scoring needed phrase-table entries that are not present.

    ``keys`` holds the missing ``(attribute, object)`` tuples so callers can
    emit a request file for them.
    """

    def __init__(self, keys):
        self.keys = sorted(set(keys))
        preview = ", ".join(f"({a!r}, {o!r})" for a, o in self.keys[:5])
        more = "" if len(self.keys) <= 5 else f" (+{len(self.keys) - 5} more)"
        super().__init__(f"missing phrase-table entries: {preview}{more}")
