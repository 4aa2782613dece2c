#pragma once

#include <stdexcept>
#include <string>

namespace oswitch {

// Malformed structural input (wrong shapes, mismatched lattices, bad config).
struct StructuralError : std::runtime_error {
    explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

// A solver precondition failed (terminal data outside the domain, step size
// too coarse for the Lipschitz constant, ...).
struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

// A configured resource cap would be exceeded (node counts, policy counts).
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// An internal consistency check failed; indicates a bug upstream, not bad input.
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace oswitch
