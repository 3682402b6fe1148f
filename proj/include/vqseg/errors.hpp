#pragma once

#include <stdexcept>

namespace vqseg {

// Shape/rank violations in tensor ops and model wiring.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input files (sequence, label, manifest, config, checkpoint).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally valid input that violates a documented invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf or other numeric failure inside the engine.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vqseg
