#include "patchforge/resample.hpp"

#include <cmath>

namespace patchforge {

Tensor bilinear_matrix(std::size_t src_h, std::size_t src_w, std::size_t dst_h,
                       std::size_t dst_w) {
    if (src_h == 0 || src_w == 0 || dst_h == 0 || dst_w == 0)
        throw ConfigError("bilinear_matrix: zero dimension");
    Tensor m({dst_h * dst_w, src_h * src_w}, 0.0);
    const double sy = dst_h > 1 ? static_cast<double>(src_h - 1) / static_cast<double>(dst_h - 1) : 0.0;
    const double sx = dst_w > 1 ? static_cast<double>(src_w - 1) / static_cast<double>(dst_w - 1) : 0.0;
    for (std::size_t y = 0; y < dst_h; ++y)
        for (std::size_t x = 0; x < dst_w; ++x) {
            const double fy = y * sy;
            const double fx = x * sx;
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t y1 = std::min(y0 + 1, src_h - 1);
            const std::size_t x1 = std::min(x0 + 1, src_w - 1);
            const double wy = fy - static_cast<double>(y0);
            const double wx = fx - static_cast<double>(x0);
            double* row = &m.v[(y * dst_w + x) * src_h * src_w];
            row[y0 * src_w + x0] += (1.0 - wy) * (1.0 - wx);
            row[y0 * src_w + x1] += (1.0 - wy) * wx;
            row[y1 * src_w + x0] += wy * (1.0 - wx);
            row[y1 * src_w + x1] += wy * wx;
        }
    return m;
}

Tensor resample(const Tensor& m, const Tensor& x, std::size_t dst_h, std::size_t dst_w) {
    const std::size_t plane_in = m.shape[1];
    const std::size_t plane_out = m.shape[0];
    const std::size_t channels = x.size() / plane_in;
    if (channels * plane_in != x.size()) throw ConfigError("resample: size mismatch");
    std::vector<std::size_t> shape = channels == 1
                                         ? std::vector<std::size_t>{dst_h, dst_w}
                                         : std::vector<std::size_t>{channels, dst_h, dst_w};
    Tensor out(shape, 0.0);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t r = 0; r < plane_out; ++r) {
            double acc = 0.0;
            const double* mr = &m.v[r * plane_in];
            const double* xc = &x.v[c * plane_in];
            for (std::size_t i = 0; i < plane_in; ++i) acc += mr[i] * xc[i];
            out.v[c * plane_out + r] = acc;
        }
    return out;
}

}  // namespace patchforge
