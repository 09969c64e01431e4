"""Exceptions shared across more than one subsystem.

Errors that belong to a single module (codec errors, config errors, ...)
live next to the code that raises them; this module only holds the base
classes and the cross-cutting transport errors.
"""


class SwarmlinkError(Exception):
    """Base class for all errors raised by this package."""


class ProtocolError(SwarmlinkError):
    """A frame violated the wire protocol. Base class for codec errors."""


class PortBindConflict(SwarmlinkError):
    """A datagram port was already bound by another process or socket.

    This is the observable failure mode of running two instances with the
    same index: both resolve to the same port numbers and the second bind
    fails.
    """

    def __init__(self, port: int):
        self.port = port
        super().__init__(f"port {port} is already in use")
