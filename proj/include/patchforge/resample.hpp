#pragma once

#include "patchforge/tensor.hpp"

namespace patchforge {

// Bilinear interpolation as a constant matrix [dst_h*dst_w, src_h*src_w],
// align-corners convention so an equal-size resize is the exact identity.
Tensor bilinear_matrix(std::size_t src_h, std::size_t src_w, std::size_t dst_h,
                       std::size_t dst_w);

// Apply a plane-interpolation matrix to a [h, w] or [c, h, w] tensor.
Tensor resample(const Tensor& m, const Tensor& x, std::size_t dst_h, std::size_t dst_w);

}  // namespace patchforge
