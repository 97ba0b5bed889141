#pragma once

#include <stdexcept>
#include <string>

namespace chainbsde {

/// Base class of every error raised by the library. `kind()` is the short
/// module-level name (e.g. "NonGenerator") that the CLI prints.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define CHAINBSDE_ERROR(Name)                                              \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

CHAINBSDE_ERROR(NonGenerator);
CHAINBSDE_ERROR(BadSchedule);
CHAINBSDE_ERROR(BadState);
CHAINBSDE_ERROR(ContractionViolated);
CHAINBSDE_ERROR(NonFinite);
CHAINBSDE_ERROR(PreconditionUnmet);
CHAINBSDE_ERROR(ObstacleIncompatible);
CHAINBSDE_ERROR(RateBoundViolated);
CHAINBSDE_ERROR(UnstableGamma);
CHAINBSDE_ERROR(NonPositivePrices);
CHAINBSDE_ERROR(SingularPhi);
CHAINBSDE_ERROR(DimensionMismatch);
CHAINBSDE_ERROR(MissingInputs);
CHAINBSDE_ERROR(ConfigError);

#undef CHAINBSDE_ERROR

}  // namespace chainbsde
