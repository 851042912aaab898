"""Exception hierarchy shared by every hinforge module."""


class HinforgeError(Exception):
    pass


# graph construction / meta-paths
class GraphError(HinforgeError):
    pass


class DanglingEdge(GraphError):
    def __init__(self, src, dst, missing):
        super().__init__(f"edge ({src}, {dst}) references missing node {missing}")
        self.src, self.dst, self.missing = src, dst, missing


class DuplicateNodeId(GraphError):
    pass


class TypeMismatch(GraphError):
    pass


class UnknownType(GraphError):
    pass


class WrongStartType(GraphError):
    pass


class MetaPathTooLong(GraphError):
    pass


class GraphFormatError(GraphError):
    pass


# autodiff
class AutodiffError(HinforgeError):
    pass


class ShapeMismatch(AutodiffError):
    pass


class NonFiniteValue(AutodiffError):
    pass


class EmptyInput(AutodiffError):
    pass


class NonScalarLoss(AutodiffError):
    pass


class NonDeterministicFunction(AutodiffError):
    pass


# model
class ModelError(HinforgeError):
    pass


class EmptyNeighborhood(ModelError):
    pass


class UnlabeledNodeInBatch(ModelError):
    pass


class EmptyTrainingSet(ModelError):
    pass


class ClassMissingFromTrainingSet(ModelError):
    pass


class CheckpointError(ModelError):
    pass


# federated simulation
class FederationError(HinforgeError):
    pass


class UnknownWorker(FederationError):
    pass


class MissingWorkerUpdate(FederationError):
    pass


class InvalidPartition(FederationError):
    pass


# influence / teams
class EmptyGraph(HinforgeError):
    pass


class KTooLarge(HinforgeError):
    pass


class EmptyAfterFilter(HinforgeError):
    pass


class MissingEmbedding(HinforgeError):
    pass


class MissingInfluence(HinforgeError):
    pass


class UniverseMismatch(HinforgeError):
    pass


class LengthMismatch(HinforgeError):
    pass


# workbench
class InfeasibleConfig(HinforgeError):
    pass


class ConfigError(HinforgeError):
    """Invalid run configuration; ``problems`` maps field path -> message."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = {"config": problems}
        self.problems = dict(problems)
        msg = "; ".join(f"{k}: {v}" for k, v in sorted(self.problems.items()))
        super().__init__(msg)
