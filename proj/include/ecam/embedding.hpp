#pragma once

#include "ecam/tensor.hpp"

namespace ecam {

// Network output before (raw) and after (unit) L2 normalization.
struct EmbeddingPair {
  Tensor raw;
  Tensor unit;

  // Builds the pair from a raw embedding; throws DegenerateInputError when
  // raw is the zero vector.
  static EmbeddingPair from_raw(Tensor raw);
};

}  // namespace ecam
