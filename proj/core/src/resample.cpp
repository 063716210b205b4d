#include "probekit/resample.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

struct AxisTap {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of hi; lo gets 1 - frac
};

// Half-pixel-center taps along one axis. The source coordinate
// (i + 0.5) * n / t - 0.5 is evaluated as ((2i + 1) n - t) / (2t) so that
// centers aligned with source centers land exactly on integers.
std::vector<AxisTap> axis_taps(std::size_t n, std::size_t t) {
  std::vector<AxisTap> taps(t);
  const double max_coord = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < t; ++i) {
    const double num = static_cast<double>((2 * i + 1) * n) - static_cast<double>(t);
    double c = num / static_cast<double>(2 * t);
    c = std::clamp(c, 0.0, max_coord);
    const auto lo = static_cast<std::size_t>(std::floor(c));
    taps[i] = {lo, std::min(lo + 1, n - 1), c - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

RealTensor bilinear_upsample(const RealTensor& src, std::size_t target_h, std::size_t target_w) {
  if (src.height == 0 || src.width == 0 || src.channels == 0) {
    throw ArgumentError("bilinear_upsample: empty source");
  }
  if (target_h < src.height || target_w < src.width) {
    throw ArgumentError("bilinear_upsample: target " + std::to_string(target_h) + "x" +
                        std::to_string(target_w) + " smaller than source " +
                        std::to_string(src.height) + "x" + std::to_string(src.width));
  }
  const std::size_t k = src.channels;
  const auto ty = axis_taps(src.height, target_h);
  const auto tx = axis_taps(src.width, target_w);

  // Horizontal pass: h x target_w x k.
  std::vector<double> rows(src.height * target_w * k);
  for (std::size_t a = 0; a < src.height; ++a) {
    const double* s = &src.data[a * src.width * k];
    double* r = &rows[a * target_w * k];
    for (std::size_t j = 0; j < target_w; ++j) {
      const auto& tap = tx[j];
      const double* s0 = s + tap.lo * k;
      const double* s1 = s + tap.hi * k;
      for (std::size_t c = 0; c < k; ++c) {
        r[j * k + c] = (1.0 - tap.frac) * s0[c] + tap.frac * s1[c];
      }
    }
  }

  RealTensor out(target_h, target_w, k);
  const std::size_t row_len = target_w * k;
  for (std::size_t i = 0; i < target_h; ++i) {
    const auto& tap = ty[i];
    const double* r0 = &rows[tap.lo * row_len];
    const double* r1 = &rows[tap.hi * row_len];
    double* o = &out.data[i * row_len];
    const double w0 = 1.0 - tap.frac;
    const double w1 = tap.frac;
    for (std::size_t j = 0; j < row_len; ++j) o[j] = w0 * r0[j] + w1 * r1[j];
  }
  return out;
}

RealTensor upsample_adjoint(const RealTensor& grad_out, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0 || grad_out.channels == 0) {
    throw ArgumentError("upsample_adjoint: empty shape");
  }
  if (grad_out.height < h || grad_out.width < w) {
    throw ArgumentError("upsample_adjoint: gradient " + std::to_string(grad_out.height) + "x" +
                        std::to_string(grad_out.width) + " smaller than source " +
                        std::to_string(h) + "x" + std::to_string(w));
  }
  if (grad_out.data.size() != grad_out.height * grad_out.width * grad_out.channels) {
    throw ArgumentError("upsample_adjoint: gradient buffer size mismatch");
  }
  const std::size_t k = grad_out.channels;
  const std::size_t target_h = grad_out.height;
  const std::size_t target_w = grad_out.width;
  const auto ty = axis_taps(h, target_h);
  const auto tx = axis_taps(w, target_w);

  // Transpose of the vertical pass: h x target_w x k.
  const std::size_t row_len = target_w * k;
  std::vector<double> rows(h * row_len, 0.0);
  for (std::size_t i = 0; i < target_h; ++i) {
    const auto& tap = ty[i];
    const double* g = &grad_out.data[i * row_len];
    double* r0 = &rows[tap.lo * row_len];
    double* r1 = &rows[tap.hi * row_len];
    const double w0 = 1.0 - tap.frac;
    const double w1 = tap.frac;
    for (std::size_t j = 0; j < row_len; ++j) {
      r0[j] += w0 * g[j];
      r1[j] += w1 * g[j];
    }
  }

  // Transpose of the horizontal pass.
  RealTensor out(h, w, k);
  for (std::size_t a = 0; a < h; ++a) {
    const double* r = &rows[a * row_len];
    double* o = &out.data[a * w * k];
    for (std::size_t j = 0; j < target_w; ++j) {
      const auto& tap = tx[j];
      double* o0 = o + tap.lo * k;
      double* o1 = o + tap.hi * k;
      for (std::size_t c = 0; c < k; ++c) {
        o0[c] += (1.0 - tap.frac) * r[j * k + c];
        o1[c] += tap.frac * r[j * k + c];
      }
    }
  }
  return out;
}

}  // namespace probekit
