#pragma once

#include <stdexcept>
#include <string>

namespace tubespec {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define TUBESPEC_ERROR(Name)                 \
    class Name : public Error {              \
    public:                                  \
        explicit Name(const std::string& m)  \
            : Error(#Name ": " + m) {}       \
    };

TUBESPEC_ERROR(DomainEmpty)
TUBESPEC_ERROR(DomainNotConnected)
TUBESPEC_ERROR(EigensolverDiverged)
TUBESPEC_ERROR(FactorizationFailed)
TUBESPEC_ERROR(NotApplicable)
TUBESPEC_ERROR(FredholmViolation)
TUBESPEC_ERROR(FrameDriftError)
TUBESPEC_ERROR(TubeOverlapError)
TUBESPEC_ERROR(SupportTruncationError)
TUBESPEC_ERROR(QuadratureResolutionError)
TUBESPEC_ERROR(GridBudgetError)
TUBESPEC_ERROR(DegenerateModeError)
TUBESPEC_ERROR(ModeTrackingError)
TUBESPEC_ERROR(InvalidFormPair)
TUBESPEC_ERROR(DeformationTooLarge)
TUBESPEC_ERROR(ConfigError)
TUBESPEC_ERROR(FitDomainError)
TUBESPEC_ERROR(NotImplemented)
TUBESPEC_ERROR(ZeroFieldWarning)
TUBESPEC_ERROR(NoDiscreteMode)

#undef TUBESPEC_ERROR

}  // namespace tubespec
