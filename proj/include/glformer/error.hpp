#pragma once

#include <stdexcept>
#include <string>

namespace glformer {

// Error taxonomy. The CLI maps these onto exit codes (config -> 2, io -> 3).
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Misuse of an API contract (e.g. backward() on a non-scalar node).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A graph whose degree matrix cannot be normalized.
struct DegenerateGraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace glformer
