"""Exception hierarchy shared by every stage of the pipeline."""


class PccError(Exception):
    """Base class for all library errors."""


class MalformedRecord(PccError, ValueError):
    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class NoBackbone(PccError, ValueError):
    pass


class LengthMismatch(PccError, ValueError):
    pass


class UnknownSymbol(PccError, ValueError):
    pass


class MissingAtom(PccError, ValueError):
    pass


class TooFewNodes(PccError, ValueError):
    pass


class SameRank(PccError, ValueError):
    pass


class OddDim(PccError, ValueError):
    pass


class DegenerateCell(PccError, ValueError):
    pass


class ZeroSpectrum(PccError, ValueError):
    pass


class CoincidentPoints(PccError, ValueError):
    pass


class DegenerateCloud(PccError, ValueError):
    pass


class ZeroCom(PccError, ValueError):
    pass


class IsolatedNode(PccError, ValueError):
    pass


class ShapeMismatch(PccError, ValueError):
    pass


class BadConfig(PccError, ValueError):
    pass


class CorruptBlob(PccError, ValueError):
    pass


class VersionMismatch(PccError, ValueError):
    pass


class MissingProteinChannel(PccError, ValueError):
    pass
