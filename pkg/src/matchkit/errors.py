"""Exception hierarchy.

Every domain error carries a stable upper-snake ``code`` that the CLI writes
to its machine-readable error JSON.
"""


class MatchkitError(Exception):
    """Base class for domain errors (CLI exit status 1)."""

    code = "MATCHKIT_ERROR"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"code": self.code, "message": str(self)}
        out.update({k: v for k, v in self.details.items()})
        return out


class NonPositiveMass(MatchkitError):
    code = "NON_POSITIVE_MASS"


class DimensionMismatch(MatchkitError):
    code = "DIMENSION_MISMATCH"


class DuplicateTypeLabel(MatchkitError):
    code = "DUPLICATE_TYPE_LABEL"


class InvalidTypeLabel(MatchkitError):
    code = "INVALID_TYPE_LABEL"


class InfeasibleMatching(MatchkitError):
    code = "INFEASIBLE_MATCHING"


class NonFiniteUtility(MatchkitError):
    code = "NON_FINITE_UTILITY"


class BoundaryShares(MatchkitError):
    code = "BOUNDARY_SHARES"


class NoConvergence(MatchkitError):
    code = "NO_CONVERGENCE"


class NotLogit(MatchkitError):
    code = "NOT_LOGIT"


class RankDeficientBasis(MatchkitError):
    code = "RANK_DEFICIENT_BASIS"


class SingularSystem(MatchkitError):
    code = "SINGULAR_SYSTEM"


class OutOfRangeMatching(MatchkitError):
    code = "OUT_OF_RANGE_MATCHING"


class UnsupportedDistribution(MatchkitError):
    code = "UNSUPPORTED_DISTRIBUTION"


class InvalidSpec(MatchkitError):
    code = "INVALID_SPEC"
