"""Exception hierarchy shared across the toolkit."""


class SynthGridError(Exception):
    """Base class for all toolkit errors."""


# --- case parsing / data model ---

class IoError(SynthGridError):
    """A required input file is missing or unreadable."""


class ParseError(SynthGridError):
    def __init__(self, path, line, column, reason):
        self.path = path
        self.line = line
        self.column = column
        self.reason = reason
        super().__init__(f"{path}:{line}: column '{column}': {reason}")


class IntegrityError(SynthGridError):
    """A record references an entity that does not exist."""


class UnknownInterconnection(SynthGridError):
    pass


# --- calibration ---

class NoGeneratorsForTarget(SynthGridError):
    def __init__(self, state, fuel):
        self.state = state
        self.fuel = fuel
        super().__init__(f"no generators for target ({state}, {fuel})")


class ZeroGroupCapacity(SynthGridError):
    pass


class ZeroCurrentPrice(SynthGridError):
    pass


class DomainMismatch(SynthGridError):
    pass


class EmptyProfile(SynthGridError):
    pass


class SpurTopologyError(SynthGridError):
    pass


# --- time series ---

class ZeroTotalWeight(SynthGridError):
    pass


class NoDonorData(SynthGridError):
    pass


class TooShort(SynthGridError):
    pass


class NoValidNeighbor(SynthGridError):
    pass


class BadMix(SynthGridError):
    pass


class InfeasibleMonth(SynthGridError):
    pass


# --- optimization ---

class DimensionMismatch(SynthGridError):
    pass


class UnboundedCost(SynthGridError):
    pass


class NumericalFailure(SynthGridError):
    pass


class NotOptimal(SynthGridError):
    pass


# --- harness / upgrade / report ---

class BadWindowLength(SynthGridError):
    pass


class RetryCapExceeded(SynthGridError):
    def __init__(self, window):
        self.window = window
        super().__init__(f"retry cap exceeded in window {window}")


class MissingProfile(SynthGridError):
    def __init__(self, entity):
        self.entity = entity
        super().__init__(f"missing profile for entity {entity}")


class IterationCapExceeded(SynthGridError):
    def __init__(self, records):
        self.records = records
        super().__init__(f"upgrade iteration cap exceeded after {len(records)} upgrades")


class EmptyLog(SynthGridError):
    pass


class BadCap(SynthGridError):
    pass


class ConfigError(SynthGridError):
    pass
