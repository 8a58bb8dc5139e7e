#pragma once

#include <stdexcept>
#include <string>

namespace pathmeasure {

// Integration step cannot proceed (singularity approach, step underflow).
class IntegrationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Boundary-value search failed to refine a bracketed root.
class ShootingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Endpoint map is degenerate: Van Vleck factor diverges, Maslov index undefined.
class CausticError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// An internal identity that must hold numerically was violated.
class ConsistencyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Decay vertex solve failed (no real vertex, vertex outside window, no convergence).
class DecaySolveError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace pathmeasure
