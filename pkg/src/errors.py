"""
Exceptions raised by the sampling discretization library.

Every error derives from ValueError so callers that only care about bad input
can catch the builtin; the service layer turns them into unsuccessful
ComputationResponse objects.
"""


class DiscretizationError(ValueError):
    """Base class for all library errors."""


class DimensionMismatchError(DiscretizationError):
    """Operands live on tori of different dimension."""


class UnsupportedExponentError(DiscretizationError):
    """Only even positive exponents q are supported."""


class InvalidClassError(DiscretizationError):
    """The operation is not defined for this smoothness class."""


class NonLatticeRuleError(DiscretizationError):
    """The dual-lattice formula needs an equal-weight lattice rule."""


class MissingConstantError(DiscretizationError):
    """The quasi-algebra constant has not been computed for the class."""


class EmptyNullspaceError(DiscretizationError):
    """No nonzero class member vanishes on the node set inside the box."""


class MembershipError(DiscretizationError):
    """A constructed function left the unit ball of its class."""


class SequenceTooShortError(DiscretizationError):
    """An explicit entropy sequence does not reach the required index."""


class DegenerateFitError(DiscretizationError):
    """The least-squares design matrix is rank deficient."""


class ExperimentConfigError(DiscretizationError):
    """The experiment configuration violates a module precondition."""


class NotPrimeError(DiscretizationError):
    """Korobov search requires a prime modulus."""


class EmptyBoxError(DiscretizationError):
    """The frequency box contains no points."""
