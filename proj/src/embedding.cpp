#include "ragsc/embedding.hpp"

#include <cmath>

#include "ragsc/error.hpp"

namespace ragsc {

Embedding Embedding::unit(std::vector<float> values) {
  double sum = 0.0;
  for (const float v : values) sum += static_cast<double>(v) * v;
  Embedding e{std::move(values), false};
  if (sum > 0.0) {
    const double inv = 1.0 / std::sqrt(sum);
    for (auto& v : e.values) v = static_cast<float>(v * inv);
    e.normalized = true;
  }
  return e;
}

double l2_norm(const Embedding& e) {
  double sum = 0.0;
  for (const float v : e.values) sum += static_cast<double>(v) * v;
  return std::sqrt(sum);
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    fail(ErrorCode::DimensionMismatch,
         "embedding dims " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double x = a.values[i], y = b.values[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace ragsc
