#pragma once

#include <stdexcept>
#include <string>

namespace tcert {

/// Base class for all library errors. Subclasses carry the failure kind in
/// the type; the message names the offending regime/row/parameter.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define TCERT_DEFINE_ERROR(NAME)                                               \
    class NAME : public Error {                                                \
    public:                                                                    \
        using Error::Error;                                                    \
    };

// model validation
TCERT_DEFINE_ERROR(RowSumViolation)
TCERT_DEFINE_ERROR(NegativeOffDiagonal)
TCERT_DEFINE_ERROR(SingularVolatility)
TCERT_DEFINE_ERROR(NegativeRate)
TCERT_DEFINE_ERROR(UnboundedPayoff)
TCERT_DEFINE_ERROR(NonPositivePrice)

// kernel / quadrature
TCERT_DEFINE_ERROR(DegenerateTime)
TCERT_DEFINE_ERROR(NonPositiveCoordinate)
TCERT_DEFINE_ERROR(QuadratureDivergence)
TCERT_DEFINE_ERROR(CholeskyFailure)
TCERT_DEFINE_ERROR(QuadratureDimension)

// solvers
TCERT_DEFINE_ERROR(NoConvergence)
TCERT_DEFINE_ERROR(LinearSolveFailure)
TCERT_DEFINE_ERROR(ProbeOutsideDomain)

// bounds
TCERT_DEFINE_ERROR(AnchorInfeasible)
TCERT_DEFINE_ERROR(InvalidSupersolution)
TCERT_DEFINE_ERROR(ToleranceUnreachable)

// configuration
TCERT_DEFINE_ERROR(ConfigError)

#undef TCERT_DEFINE_ERROR

}  // namespace tcert
