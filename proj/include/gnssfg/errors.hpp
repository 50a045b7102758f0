#pragma once

#include <stdexcept>
#include <string>

namespace gnssfg {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Graph construction
class DuplicateVariable : public Error { using Error::Error; };
class DanglingEdge : public Error { using Error::Error; };
class BadNoiseModel : public Error { using Error::Error; };
class ArityError : public Error { using Error::Error; };
class IncompleteEstimate : public Error { using Error::Error; };

// Solving
class SingularSystem : public Error { using Error::Error; };
class KernelMisuse : public Error { using Error::Error; };

// Measurement models
class DegenerateGeometry : public Error { using Error::Error; };
class MissingObservable : public Error { using Error::Error; };
class EpochGapError : public Error { using Error::Error; };

// Sliding window
class UnknownVariable : public Error { using Error::Error; };
class EpochOrderError : public Error { using Error::Error; };

// Simulation
class GeometryError : public Error { using Error::Error; };

// Filtering
class SingularInnovation : public Error { using Error::Error; };

// Configuration / CLI
class ConfigError : public Error { using Error::Error; };

}  // namespace gnssfg
