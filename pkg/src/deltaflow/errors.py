"""Exception hierarchy.

Everything raised on purpose derives from ``DeltaFlowError`` so the CLI can
map failures onto exit codes. Geometry/input problems are ``InputError``,
solver and ray-tracing failures are ``NumericalError``.
"""


class DeltaFlowError(Exception):
    pass


class InputError(DeltaFlowError, ValueError):
    pass


class NumericalError(DeltaFlowError, ArithmeticError):
    pass


# geometry
class NonConvex(InputError):
    pass


class DegenerateEdge(InputError):
    pass


class ClockwiseOrder(InputError):
    pass


class OutOfRange(InputError):
    pass


class NonConformingEdge(InputError):
    pass


class OrphanOverlap(InputError):
    pass


class MeshFormatError(InputError):
    pass


# directions
class TooFew(InputError):
    pass


class EmptyLocalSet(InputError):
    pass


class Grazing(InputError):
    pass


class NormalFlip(InputError):
    pass


class NotShared(InputError):
    pass


# transfer / solve
class NoHit(NumericalError):
    pass


class NegativeLength(InputError):
    pass


class NotConverged(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


# sources / interior
class NoMatchingEdge(InputError):
    pass


class SourceOnBoundary(InputError):
    pass


class SourceNotVertex(InputError):
    pass


class NotInCell(InputError):
    pass


class AtSource(InputError):
    pass


# shell
class InsufficientNeighbors(InputError):
    pass


class RankDeficientFit(NumericalError):
    pass


class InvalidWavenumbers(InputError):
    pass


class MissingThreshold(InputError):
    pass


# oracle
class ZeroDamping(InputError):
    pass


class NonConvexDomain(InputError):
    pass


class LengthMismatch(InputError):
    pass


class DegenerateDenominator(InputError):
    pass


class NonPositiveError(InputError):
    pass


class NoOracle(InputError):
    pass


class ConfigError(InputError):
    pass
