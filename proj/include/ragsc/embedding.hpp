#pragma once

#include <cstddef>
#include <vector>

namespace ragsc {

struct Embedding {
  std::vector<float> values;
  bool normalized = false;

  std::size_t dim() const noexcept { return values.size(); }

  // L2-normalized copy of `values`; a zero vector stays zero and unflagged.
  static Embedding unit(std::vector<float> values);

  friend bool operator==(const Embedding&, const Embedding&) = default;
};

double l2_norm(const Embedding& e);

// Cosine similarity accumulated in double; 0 when either side is the zero
// vector. Throws DimensionMismatch.
double cosine(const Embedding& a, const Embedding& b);

}  // namespace ragsc
