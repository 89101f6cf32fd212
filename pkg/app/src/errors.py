"""
Exceptions raised across the simulator.

Every "hard error" of the simulator is one of these classes, so the command
line front end can map them onto exit codes in one place.
"""


class ManetError(Exception):
    """Base class of all simulator errors."""


class SchedulingError(ManetError):
    """An event was scheduled in the past or a draw was requested on an empty range."""


class ConfigError(ManetError):
    """A configuration value or overrides file line is invalid."""


class ScenarioError(ManetError):
    """Invalid generator arguments, a malformed scenario file or an unknown node id."""


class TraceParseError(ManetError, ValueError):
    """A trace line does not match the trace grammar.

    Attributes:
        field (str): Name of the offending field.
        line (str): The rejected line.
    """

    def __init__(self, field, line, detail=''):
        self.field = field
        self.line = line
        message = f"bad trace field '{field}' in line: {line!r}"
        if detail:
            message += f' ({detail})'
        super().__init__(message)


class UndefinedMetricError(ManetError):
    """A metric has no defined value for the given trace (e.g. nothing generated)."""


class ConservationError(ManetError):
    """A data packet reached more than one terminal outcome."""


class HarnessError(ManetError):
    """Experiment orchestration failed (missing inputs, I/O failures)."""
