#pragma once

#include <cstddef>

#include "probekit/tensor.hpp"

namespace probekit {

// Bilinear upsampling with the half-pixel-center convention: output row i
// samples source coordinate (i + 0.5) * h / target_h - 0.5, clamped to
// [0, h - 1]; columns likewise. Channels are resampled independently.
// Throws ArgumentError if the target is smaller than the source.
RealTensor bilinear_upsample(const RealTensor& src, std::size_t target_h, std::size_t target_w);

// Transpose of bilinear_upsample viewed as a linear map from h x w x k to
// target_h x target_w x k. grad_out supplies the target dims.
RealTensor upsample_adjoint(const RealTensor& grad_out, std::size_t h, std::size_t w);

}  // namespace probekit
