"""Error hierarchy for the bridge."""


class BridgeError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(BridgeError, ValueError):
    """A caller-supplied value violates a precondition."""


class FormatError(BridgeError):
    """A latent or image file violates its byte format.

    Carries the violated rule name and the byte offset of the offending
    field.
    """

    def __init__(self, rule: str, offset: int, detail: str):
        self.rule = rule
        self.offset = offset
        self.detail = detail
        super().__init__(f"{rule} at offset {offset}: {detail}")


class ModelError(BridgeError):
    """Checkpoint loading or model execution failed."""
