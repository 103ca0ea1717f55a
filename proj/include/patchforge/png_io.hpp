#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patchforge/tensor.hpp"

namespace patchforge::png {

// Decoded PNG: interleaved samples at native bit depth (1-bit samples are
// expanded to 0/1). Covers grayscale, gray+alpha, RGB and RGBA at the
// depths this project writes plus common 8-bit inputs.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;   // 1, 2, 3 or 4
    std::size_t bit_depth = 0;  // 1, 8 or 16
    std::vector<std::uint16_t> samples;  // row-major, channel-interleaved
};

std::vector<std::uint8_t> encode(const Image& img);
Image decode(const std::uint8_t* data, std::size_t size);
Image decode(const std::vector<std::uint8_t>& data);

void write_file(const std::string& path, const Image& img);
Image read_file(const std::string& path);

// [3, H, W] tensor in [0,1] <-> 8-bit RGB
Image from_rgb_tensor(const Tensor& pixels);
Tensor to_rgb_tensor(const Image& img);

// UV coordinates as 2-channel 16-bit PNG (gray = u, alpha = v).
Image from_uv_tensors(const Tensor& u, const Tensor& v);
void to_uv_tensors(const Image& img, Tensor& u, Tensor& v);

// Binary masks as 1-bit grayscale.
Image from_mask_tensor(const Tensor& mask);
Tensor to_mask_tensor(const Image& img);

}  // namespace patchforge::png
