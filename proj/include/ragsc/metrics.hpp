#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "ragsc/embedding.hpp"
#include "ragsc/image.hpp"

namespace ragsc {

struct MetricsReport {
  double ms_ssim = 0.0;
  double clip_similarity = 0.0;
  // Reconstruction embedding against the received caption's text embedding.
  std::optional<double> clip_text_similarity;
  double measured_ber = 0.0;
  double compression_ratio = 0.0;
  // Filled only by external perceptual tooling.
  std::optional<double> lpips;
  std::optional<double> pieapp;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct MsSsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double max_value = 255.0;
  int scales = 5;
};

inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

// Multi-scale SSIM with valid-mode Gaussian windows and 2x2 mean pooling (odd
// sizes are edge-padded before pooling). Per-scale contrast-structure terms and
// the coarsest-scale SSIM are clamped at zero before weighting; multi-channel
// scores are averaged over channels. Inputs with mismatched channel counts are
// compared in grayscale. Images too small for five scales use fewer, with the
// leading weights renormalized; below the window size the window shrinks.
double ms_ssim(const RasterImage& a, const RasterImage& b, const MsSsimOptions& options = {});

// Number of scales ms_ssim will use for a w x h input.
int ms_ssim_scale_count(std::uint32_t width, std::uint32_t height, const MsSsimOptions& options = {});

double clip_similarity(const Embedding& image, const Embedding& reference);

// Hamming distance / bit length over equally long byte sequences.
double measured_ber(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received);

double compression_ratio(std::size_t source_bytes, std::size_t frame_bytes);

}  // namespace ragsc
