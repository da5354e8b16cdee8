"""
Exception hierarchy for TexSeek

Every error carries the CLI exit code it maps to: 2 for data and protocol
errors, 1 for usage errors.
"""


class TexSeekError(Exception):
    """Base class for all TexSeek errors"""
    exit_code = 2


class UsageError(TexSeekError):
    exit_code = 1


class ConfigError(TexSeekError):
    pass


class ImageFormatError(TexSeekError):
    """Netpbm parse failure at a given byte offset"""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class GeometryError(TexSeekError):
    pass


class CapacityError(TexSeekError):
    pass


class ShortReadError(TexSeekError):
    def __init__(self, message: str = "short read"):
        super().__init__(message)


class PayloadError(TexSeekError):
    pass


class NotAPayloadError(PayloadError):
    def __init__(self, message: str = "not a stego payload"):
        super().__init__(message)


class CorruptPayloadError(PayloadError):
    def __init__(self, message: str = "corrupted payload"):
        super().__init__(message)


class NoEmbeddedAttributesError(PayloadError):
    def __init__(self, message: str = "no embedded attributes"):
        super().__init__(message)


class UnembeddableBlockError(TexSeekError):
    def __init__(self, index: int):
        super().__init__(f"unembeddable block at index {index}")
        self.index = index


class IndexFormatError(TexSeekError):
    pass


class CorpusError(TexSeekError):
    pass


class ProtocolError(TexSeekError):
    pass


class FramingError(ProtocolError):
    pass


class ConfigMismatchError(ProtocolError):
    def __init__(self, message: str = "config mismatch"):
        super().__init__(message)


class ProviderUnavailableError(TexSeekError):
    pass


class EvaluationError(TexSeekError):
    pass
