"""Exception hierarchy shared by all modules.

Every failure mode that the CLI maps to an exit code derives from one of two
roots: :class:`ContractViolation` (bad input, exit 1) or :class:`PartialFailure`
(a computation that ran but could not certify its result, exit 2).
"""


class PseudorotError(Exception):
    pass


class ContractViolation(PseudorotError, ValueError):
    """Input does not satisfy a documented precondition."""


class PartialFailure(PseudorotError, RuntimeError):
    """A numerical procedure failed honestly; nothing invalid was returned."""


class InvalidLiftError(ContractViolation):
    pass


class RationalInputError(ContractViolation):
    pass


class CapacityError(ContractViolation):
    """The requested problem needs more resolution than the solver will allocate."""


class OpenLoopError(ContractViolation):
    pass


class IntegrationFailure(PartialFailure):
    pass


class ConstructionError(PartialFailure):
    pass


class ResolutionError(PartialFailure):
    pass


class ContinuationNeeded(PartialFailure):
    """Newton did not converge from the supplied initial guess."""


class TopologicalFailure(PartialFailure):
    """The iterate changed winding number or left the disk."""


class ContinuationStalled(PartialFailure):
    def __init__(self, message, sigma=None, last_good=None):
        super().__init__(message)
        self.sigma = sigma
        self.last_good = last_good


class FoliationIntegrityError(PartialFailure):
    def __init__(self, message, leaves=None, s_node=None):
        super().__init__(message)
        self.leaves = leaves
        self.s_node = s_node


class ConjugacyNotFound(PartialFailure):
    pass


class BlowUpFailed(PartialFailure):
    pass
