"""Exception hierarchy for the library"""


class BandFecError(Exception):
    """Base class for every error raised by bandfec"""


class ConstructionError(BandFecError):
    """A code cannot be built from the given parameters"""


class SpecFormatError(BandFecError):
    """A code-spec or polynomial text could not be parsed"""


class InconsistentSystemError(BandFecError):
    """A linear system has a zero matrix row with a nonzero right-hand side"""

    def __init__(self, row: int):
        super().__init__(f"Inconsistent system: row {row} reduces to 0 = nonzero")
        self.row = row


class PacketError(BandFecError):
    """A symbol packet could not be parsed"""


class ConsistencyError(BandFecError):
    """Recovered source symbols do not reproduce the received repair symbols"""
