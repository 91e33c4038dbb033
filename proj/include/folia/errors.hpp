#pragma once

#include <stdexcept>
#include <string>

namespace folia {

// Configuration/input problems: bad system kind, parameters out of range,
// invariants violated at load time.  The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: Newton divergence, graph transform not contracting,
// residual above tolerance.  The CLI maps these to exit code 3.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// A lifted leaf left its tubular neighborhood before reaching the target
// transversal.  Carries the exit location in the message.
class HolonomyUndefined : public SolverError {
public:
    explicit HolonomyUndefined(const std::string& what) : SolverError(what) {}
};

// cu/cs patches failed to intersect in a single plaque (perturbation too
// large for dynamical coherence at the configured radii).
class CoherenceError : public SolverError {
public:
    explicit CoherenceError(const std::string& what) : SolverError(what) {}
};

// Foliation slices met at an angle below threshold.
class TransversalityError : public SolverError {
public:
    explicit TransversalityError(const std::string& what) : SolverError(what) {}
};

// Too few samples or too few dyadic scales for a Holder fit.
class InsufficientData : public std::runtime_error {
public:
    explicit InsufficientData(const std::string& what) : std::runtime_error(what) {}
};

} // namespace folia
