#include "ragsc/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

#include "ragsc/edgemap.hpp"
#include "ragsc/error.hpp"

namespace ragsc {

namespace {

struct Plane {
  std::size_t w = 0;
  std::size_t h = 0;
  std::vector<double> v;

  double at(std::size_t x, std::size_t y) const { return v[y * w + x]; }
};

Plane channel_plane(const RasterImage& img, std::uint32_t c) {
  Plane p{img.width(), img.height(), std::vector<double>(std::size_t{img.width()} * img.height())};
  for (std::uint32_t y = 0; y < img.height(); ++y) {
    for (std::uint32_t x = 0; x < img.width(); ++x) p.v[std::size_t{y} * p.w + x] = img.at(x, y, c);
  }
  return p;
}

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(size));
  const double centre = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - centre;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[static_cast<std::size_t>(i)];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Separable valid-mode filtering.
Plane filter_valid(const Plane& in, const std::vector<double>& taps) {
  const std::size_t n = taps.size();
  const std::size_t ow = in.w - n + 1, oh = in.h - n + 1;
  Plane rows{ow, in.h, std::vector<double>(ow * in.h)};
  for (std::size_t y = 0; y < in.h; ++y) {
    const double* src = &in.v[y * in.w];
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += taps[k] * src[x + k];
      rows.v[y * ow + x] = s;
    }
  }
  Plane out{ow, oh, std::vector<double>(ow * oh)};
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += taps[k] * rows.v[(y + k) * ow + x];
      out.v[y * ow + x] = s;
    }
  }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane p{a.w, a.h, std::vector<double>(a.v.size())};
  for (std::size_t i = 0; i < a.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
  return p;
}

// Odd dimensions replicate their last row/column, then 2x2 means.
Plane downsample(const Plane& in) {
  const std::size_t ow = (in.w + 1) / 2, oh = (in.h + 1) / 2;
  Plane out{ow, oh, std::vector<double>(ow * oh)};
  for (std::size_t y = 0; y < oh; ++y) {
    const std::size_t y0 = 2 * y, y1 = std::min(2 * y + 1, in.h - 1);
    for (std::size_t x = 0; x < ow; ++x) {
      const std::size_t x0 = 2 * x, x1 = std::min(2 * x + 1, in.w - 1);
      out.v[y * ow + x] = (in.at(x0, y0) + in.at(x1, y0) + in.at(x0, y1) + in.at(x1, y1)) / 4.0;
    }
  }
  return out;
}

struct ScaleTerms {
  double ssim;
  double cs;
};

ScaleTerms ssim_terms(const Plane& x, const Plane& y, const MsSsimOptions& o) {
  const int size = std::min<int>(o.window, static_cast<int>(std::min(x.w, x.h)));
  const auto taps = gaussian_taps(size, o.sigma);
  const double c1 = (o.k1 * o.max_value) * (o.k1 * o.max_value);
  const double c2 = (o.k2 * o.max_value) * (o.k2 * o.max_value);

  const Plane mx = filter_valid(x, taps), my = filter_valid(y, taps);
  const Plane exx = filter_valid(product(x, x), taps);
  const Plane eyy = filter_valid(product(y, y), taps);
  const Plane exy = filter_valid(product(x, y), taps);

  double ssim_sum = 0.0, cs_sum = 0.0;
  const std::size_t n = mx.v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double mux = mx.v[i], muy = my.v[i];
    const double lum = (2.0 * mux * muy + c1) / (mux * mux + muy * muy + c1);
    const double vx = exx.v[i] - mux * mux, vy = eyy.v[i] - muy * muy;
    const double cov = exy.v[i] - mux * muy;
    const double cs = (2.0 * cov + c2) / (vx + vy + c2);
    ssim_sum += lum * cs;
    cs_sum += cs;
  }
  return {ssim_sum / static_cast<double>(n), cs_sum / static_cast<double>(n)};
}

double ms_ssim_plane(Plane x, Plane y, int scales, const MsSsimOptions& o) {
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += kMsSsimWeights[s];
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    const double w = kMsSsimWeights[s] / weight_sum;
    const ScaleTerms t = ssim_terms(x, y, o);
    if (s + 1 < scales) {
      result *= std::pow(std::max(t.cs, 0.0), w);
      x = downsample(x);
      y = downsample(y);
    } else {
      result *= std::pow(std::max(t.ssim, 0.0), w);
    }
  }
  return result;
}

}  // namespace

int ms_ssim_scale_count(std::uint32_t width, std::uint32_t height, const MsSsimOptions& options) {
  const int max_scales = std::clamp(options.scales, 1, 5);
  std::uint32_t side = std::min(width, height);
  int scales = 1;
  while (scales < max_scales) {
    side = (side + 1) / 2;
    if (side < static_cast<std::uint32_t>(options.window)) break;
    ++scales;
  }
  return scales;
}

double ms_ssim(const RasterImage& a, const RasterImage& b, const MsSsimOptions& options) {
  if (a.width() != b.width() || a.height() != b.height()) {
    fail(ErrorCode::DimensionMismatch, "ms_ssim needs equal dimensions");
  }
  if (options.window < 1 || options.sigma <= 0.0) fail(ErrorCode::InvalidArgument, "bad ms_ssim window");
  const RasterImage* x = &a;
  const RasterImage* y = &b;
  RasterImage ga, gb;
  if (a.channels() != b.channels()) {
    ga = to_grayscale(a);
    gb = to_grayscale(b);
    x = &ga;
    y = &gb;
  }
  const int scales = ms_ssim_scale_count(a.width(), a.height(), options);
  double sum = 0.0;
  for (std::uint32_t c = 0; c < x->channels(); ++c) {
    sum += ms_ssim_plane(channel_plane(*x, c), channel_plane(*y, c), scales, options);
  }
  return sum / x->channels();
}

double clip_similarity(const Embedding& image, const Embedding& reference) { return cosine(image, reference); }

double measured_ber(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received) {
  if (sent.size() != received.size()) {
    fail(ErrorCode::LengthMismatch, "measured_ber over sequences of different length");
  }
  if (sent.empty()) return 0.0;
  std::size_t flips = 0;
  for (std::size_t i = 0; i < sent.size(); ++i) {
    flips += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(sent[i] ^ received[i])));
  }
  return static_cast<double>(flips) / (8.0 * static_cast<double>(sent.size()));
}

double compression_ratio(std::size_t source_bytes, std::size_t frame_bytes) {
  if (frame_bytes == 0) fail(ErrorCode::InvalidArgument, "no transmitted bytes");
  return static_cast<double>(source_bytes) / static_cast<double>(frame_bytes);
}

}  // namespace ragsc
