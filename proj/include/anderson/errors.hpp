#pragma once

#include <stdexcept>
#include <string>

namespace anderson {

// Elimination block is (numerically) resonant at the shift: min |eig(D) - lambda|
// fell below the configured floor.
struct NearSingularElimination : std::runtime_error {
    double margin;
    double floor;
    NearSingularElimination(double margin_, double floor_)
        : std::runtime_error("near-singular elimination: margin " + std::to_string(margin_) +
                             " below floor " + std::to_string(floor_)),
          margin(margin_), floor(floor_) {}
};

struct NoConvergence : std::runtime_error {
    explicit NoConvergence(const std::string& what_) : std::runtime_error(what_) {}
};

// A collar construction ran out of lattice (block not strictly inside the volume).
struct CollarExhaustsLattice : std::runtime_error {
    explicit CollarExhaustsLattice(const std::string& what_) : std::runtime_error(what_) {}
};

// Preconditions of a laboratory experiment are unsatisfiable for this realization;
// the trial should be skipped and logged, never silently patched.
struct InvalidExperiment : std::runtime_error {
    explicit InvalidExperiment(const std::string& what_) : std::runtime_error(what_) {}
};

}  // namespace anderson
