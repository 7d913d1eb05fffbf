"""Protocol outcomes that are not bugs."""


class Restart(Exception):
    """The device must discard the session and start over with fresh values."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class DeviceAbort(Exception):
    """The device refuses to continue (bad EA signature, exhausted restarts, ...)."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class ProtocolRejection(Exception):
    """An EA rejected a message; ``code`` is the wire-level error code."""

    def __init__(self, code: str, message: str = ""):
        super().__init__("{}: {}".format(code, message) if message else code)
        self.code = code
        self.message = message or code
