"""Exception hierarchy shared by all modules."""


class TomographyError(Exception):
    pass


# field
class DimensionMismatch(TomographyError, ValueError):
    pass


class MixedExperiment(TomographyError, ValueError):
    pass


class IndexOutOfRange(TomographyError, IndexError):
    pass


# netgraph
class TopologyError(TomographyError, ValueError):
    pass


class RoutingViolation(TomographyError, ValueError):
    pass


class A1Violation(RoutingViolation):
    pass


class A2Violation(RoutingViolation):
    pass


class A3Violation(RoutingViolation):
    pass


class DegenerateComponent(TomographyError, ValueError):
    pass


class GenerationFailure(TomographyError, RuntimeError):
    pass


class LabelMismatch(TomographyError, ValueError):
    pass


# simnet / tree_infer
class TooManySources(TomographyError, ValueError):
    pass


class OracleFailure(TomographyError, RuntimeError):
    pass


class InferenceFailure(TomographyError, RuntimeError):
    """Observations could not be turned into a consistent structure."""


# dag_infer
class DegenerateProbability(TomographyError, ValueError):
    pass


class NoEvidence(TomographyError, RuntimeError):
    """Every experiment lost at least one receiver's packet."""


# merge
class MissingPair(TomographyError, KeyError):
    pass


class InconsistentTypes(TomographyError, ValueError):
    pass


class UnknownEdge(TomographyError, KeyError):
    pass


# harness
class ConfigError(TomographyError, ValueError):
    pass

