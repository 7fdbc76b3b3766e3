#ifndef IBN_ERRORS_HPP_
#define IBN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ibn {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// bad arguments / bad config files -> 2, numeric or infeasibility failures -> 3.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A caller passed an argument that violates a documented precondition.
struct ParameterError : Error {
    using Error::Error;
};

// A config file (JSON / CLI flags) is malformed or inconsistent.
struct ConfigError : Error {
    using Error::Error;
};

// A numerical routine failed to converge or produced non-finite values.
struct NumericError : Error {
    using Error::Error;
};

// No admissible solution exists (partition size bounds, tree-topology sampling).
struct InfeasibleError : Error {
    using Error::Error;
};

// A shortest-path query between nodes that are not connected.
struct UnreachableError : Error {
    using Error::Error;
};

// The Bradley-Terry likelihood does not identify all rewards (disconnected data).
struct UnidentifiableError : Error {
    using Error::Error;
};

// A pluggable text generator violated its contract or its backend failed.
struct GeneratorError : Error {
    using Error::Error;
};

}  // namespace ibn

#endif  // IBN_ERRORS_HPP_
