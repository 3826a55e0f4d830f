"""Exception hierarchy shared by all netadj modules."""

from __future__ import annotations


class NetadjError(Exception):
    """Base class for all errors raised by this package."""


# --- field book parsing / compilation ---------------------------------------


class ParseError(NetadjError):
    """Malformed field-book record; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class UnitError(NetadjError):
    """Observation value outside its physical domain (e.g. zenith not in (0, 180))."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class EmptySetup(NetadjError):
    """A station setup contributes no usable observations."""


class NonpositiveDistance(NetadjError):
    """Horizontal reduction produced a distance <= 0."""


# --- regression --------------------------------------------------------------


class DegenerateInput(NetadjError):
    """Regression input admits no unique line (too few points, vertical line)."""


class DomainError(NetadjError):
    """Model linearization hit a logarithm of a non-positive value."""


# --- control database / datum -----------------------------------------------


class DuplicateControlPoint(NetadjError):
    """Conflicting duplicate (id, datum) rows in a control register."""


class UnknownDatum(NetadjError):
    """Requested datum has no points in the control database."""


class NoFixedStationsWarning(UserWarning):
    """Dataset shares no stations with the control database; network is datum-free."""


class InsufficientOverlap(NetadjError):
    """Fewer than two common points between the two datums."""


class DegenerateGeometry(NetadjError):
    """Common points are coincident; similarity transform is indeterminate."""


# --- geometry / equation rows -------------------------------------------------


class CoincidentStations(NetadjError):
    """Bearing/distance requested between two identical positions."""


class MissingCoordinates(NetadjError):
    """A station referenced by an observation has no coordinates."""


class FixedOrUnknownStation(NetadjError):
    """Column lookup for a station that carries no unknowns."""


# --- graph analysis -----------------------------------------------------------


class DisconnectedNetwork(NetadjError):
    """Observation graph splits into several components (listed on the exception)."""

    def __init__(self, components: list[set[str]]):
        self.components = components
        names = "; ".join(",".join(sorted(c)) for c in components)
        super().__init__(f"network has {len(components)} components: {names}")


class RootUnknown(NetadjError):
    """Spanning-tree root is not a node of the graph."""


class MissingLegObservation(NetadjError):
    """A cycle leg has no distance observation."""


# --- adjustment ----------------------------------------------------------------


class NonpositiveSigma(NetadjError):
    """Observation sigma must be strictly positive."""


class DimensionMismatch(NetadjError):
    """Matrix dimensions are not conformable."""


class SingularNormalMatrix(NetadjError):
    """Normal matrix is singular; the network lacks datum or configuration."""

    def __init__(self, message: str, stations: list[str] | None = None):
        self.stations = stations or []
        if self.stations:
            message = f"{message} (near-null-space stations: {', '.join(self.stations)})"
        super().__init__(message)


class RankDeficient(SingularNormalMatrix):
    """Basis-function normal matrix is singular."""


class MissingProvisional(NetadjError):
    """A station has neither fixed nor provisional coordinates."""


class NoFreeStations(NetadjError):
    """Every station is fixed; there is nothing to adjust."""


class UnreachableStation(NetadjError):
    """Stations with no observation path to any fixed station."""

    def __init__(self, stations: list[str]):
        self.stations = stations
        super().__init__(f"no observation path to a fixed station: {', '.join(stations)}")


class NotConverged(NetadjError):
    """Iteration cap reached; carries the last result for diagnosis."""

    def __init__(self, result, iterations: int):
        self.result = result
        self.iterations = iterations
        super().__init__(f"adjustment did not converge within {iterations} iterations")
