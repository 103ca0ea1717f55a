#pragma once

#include <optional>
#include <string>

#include "patchforge/tensor.hpp"

namespace patchforge {

// RGB face image, channel-major [3, H, W], values in [0, 1].
struct FaceImage {
    Tensor pixels;
    std::optional<std::string> label;

    FaceImage() = default;
    explicit FaceImage(Tensor p, std::optional<std::string> l = std::nullopt)
        : pixels(std::move(p)), label(std::move(l)) {
        if (pixels.shape.size() != 3 || pixels.shape[0] != 3)
            throw ConfigError("FaceImage: pixels must be [3, H, W]");
    }

    std::size_t height() const { return pixels.shape[1]; }
    std::size_t width() const { return pixels.shape[2]; }
};

}  // namespace patchforge
