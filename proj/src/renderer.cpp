#include "patchforge/renderer.hpp"

#include <cmath>
#include <iostream>

#include "patchforge/resample.hpp"

namespace patchforge {

UVMap UVMap::identity(std::size_t h, std::size_t w) {
    UVMap m;
    m.u = Tensor({h, w}, 0.0);
    m.v = Tensor({h, w}, 0.0);
    m.valid = Tensor({h, w}, 1.0);
    m.tex_h = h;
    m.tex_w = w;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            m.u.v[y * w + x] = w > 1 ? static_cast<double>(x) / static_cast<double>(w - 1) : 0.0;
            m.v.v[y * w + x] = h > 1 ? static_cast<double>(y) / static_cast<double>(h - 1) : 0.0;
        }
    return m;
}

PatchRegion PatchRegion::empty(std::size_t h, std::size_t w) {
    return {Tensor({h, w}, 0.0)};
}

PatchRegion PatchRegion::rect(std::size_t h, std::size_t w, std::size_t top, std::size_t left,
                              std::size_t bottom, std::size_t right) {
    if (bottom > h || right > w || top >= bottom || left >= right)
        throw ConfigError("PatchRegion: invalid rectangle");
    PatchRegion r{Tensor({h, w}, 0.0)};
    for (std::size_t y = top; y < bottom; ++y)
        for (std::size_t x = left; x < right; ++x) r.mask.v[y * w + x] = 1.0;
    return r;
}

PatchRegion PatchRegion::lower_face(std::size_t h, std::size_t w) {
    std::size_t top = h - (h * 2 + 2) / 5;  // ~40% of face height
    return rect(h, w, top, 0, h, w);
}

bool PatchRegion::is_empty() const {
    for (double x : mask.v)
        if (x >= 0.5) return false;
    return true;
}

std::array<std::size_t, 4> PatchRegion::bounding_box() const {
    const std::size_t h = mask.shape[0], w = mask.shape[1];
    std::size_t top = h, left = w, bottom = 0, right = 0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            if (mask.v[y * w + x] >= 0.5) {
                top = std::min(top, y);
                left = std::min(left, x);
                bottom = std::max(bottom, y + 1);
                right = std::max(right, x + 1);
            }
    if (bottom == 0) throw InputError("PatchRegion: bounding box of empty region");
    return {top, left, bottom, right};
}

std::vector<Point> CentroidLandmarkDetector::detect(const FaceImage& image) const {
    const std::size_t h = image.height(), w = image.width();
    const std::size_t plane = h * w;
    double total = 0.0, cx = 0.0, cy = 0.0, mn = 1e300, mx = -1e300;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double inten = 0.0;
            for (std::size_t c = 0; c < 3; ++c) inten += image.pixels.v[c * plane + y * w + x];
            mn = std::min(mn, inten);
            mx = std::max(mx, inten);
            total += inten;
            cx += inten * static_cast<double>(x);
            cy += inten * static_cast<double>(y);
        }
    if (mx - mn < 1e-9 || total <= 0.0)
        throw DetectionError("landmark detection: no face found in image");
    cx /= total;
    cy /= total;
    const double ox = static_cast<double>(w) / 8.0;
    const double oy = static_cast<double>(h) / 8.0;
    std::vector<Point> pts = {{cx, cy},           {cx - ox, cy - oy}, {cx + ox, cy - oy},
                              {cx - ox, cy + oy}, {cx + ox, cy + oy}};
    for (auto& p : pts) {
        p.x = std::min(static_cast<double>(w - 1), std::max(0.0, p.x));
        p.y = std::min(static_cast<double>(h - 1), std::max(0.0, p.y));
    }
    return pts;
}

std::vector<Point> detect_landmarks(const FaceImage& image, const LandmarkDetector& detector) {
    return detector.detect(image);
}

UVMap IdentityUvProvider::reconstruct(const FaceImage& image, const std::vector<Point>&) const {
    return UVMap::identity(image.height(), image.width());
}

Tensor face_to_uv(const FaceImage& image, const UVMap& uv) {
    const std::size_t h = image.height(), w = image.width();
    if (uv.u.shape != std::vector<std::size_t>{h, w})
        throw ConfigError("face_to_uv: UV map resolution does not match image");
    const std::size_t plane = h * w;
    const std::size_t tex_plane = uv.tex_h * uv.tex_w;
    Tensor out({3, uv.tex_h, uv.tex_w}, 0.0);
    for (std::size_t i = 0; i < plane; ++i) {
        if (uv.valid.v[i] < 0.5) continue;
        const double cu = uv.u.v[i], cv = uv.v.v[i];
        if (cu < 0.0 || cu > 1.0 || cv < 0.0 || cv > 1.0)
            throw MapIntegrityError("face_to_uv: coordinate outside [0,1]^2 at a valid pixel");
        const std::size_t tx = static_cast<std::size_t>(std::lround(cu * (uv.tex_w - 1)));
        const std::size_t ty = static_cast<std::size_t>(std::lround(cv * (uv.tex_h - 1)));
        for (std::size_t c = 0; c < 3; ++c)
            out.v[c * tex_plane + ty * uv.tex_w + tx] = image.pixels.v[c * plane + i];
    }
    return out;
}

Tensor apply_patch_in_uv(const Tensor& uv_face, const Tensor& patch_pixels,
                         const PatchRegion& region) {
    const std::size_t th = uv_face.shape[1], tw = uv_face.shape[2];
    if (region.mask.shape != std::vector<std::size_t>{th, tw})
        throw ConfigError("apply_patch_in_uv: region resolution does not match UV face");
    if (region.is_empty()) {
        std::clog << "apply_patch_in_uv: empty region, returning input unchanged\n";
        return uv_face;
    }
    const auto [top, left, bottom, right] = region.bounding_box();
    const std::size_t bh = bottom - top, bw = right - left;
    Tensor interp = bilinear_matrix(patch_pixels.shape[1], patch_pixels.shape[2], bh, bw);
    Tensor patch_fit = resample(interp, patch_pixels, bh, bw);
    Tensor out = uv_face;
    const std::size_t plane = th * tw;
    for (std::size_t y = top; y < bottom; ++y)
        for (std::size_t x = left; x < right; ++x) {
            if (region.mask.v[y * tw + x] < 0.5) continue;
            for (std::size_t c = 0; c < 3; ++c)
                out.v[c * plane + y * tw + x] =
                    patch_fit.v[c * bh * bw + (y - top) * bw + (x - left)];
        }
    return out;
}

Renderer::Renderer(RenderMode mode, std::shared_ptr<const UvProvider> provider,
                   std::shared_ptr<const LandmarkDetector> detector)
    : mode_(mode), provider_(std::move(provider)), detector_(std::move(detector)) {}

ad::Var Renderer::render_ad(ad::Graph& g, const FaceImage& face, ad::Var patch,
                            const PatchRegion& region) const {
    if (mode_ != RenderMode::kPlanar)
        throw CapabilityError("render_ad: differentiable path is planar-only");
    const std::size_t h = face.height(), w = face.width();
    if (region.mask.shape != std::vector<std::size_t>{h, w})
        throw ConfigError("render: region resolution does not match face");
    const auto& pshape = g.value(patch).shape;
    const std::size_t plane = h * w;

    // background: face pixels outside the mask, bit-preserved
    Tensor background = face.pixels;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            if (region.mask.v[i] >= 0.5) background.v[c * plane + i] = 0.0;

    if (region.is_empty()) {
        std::clog << "render: empty region, output equals input face\n";
        Tensor zero({3 * h * w, g.value(patch).size()}, 0.0);
        return g.add_const(g.matvec(zero, patch, {3, h, w}), background);
    }

    // paste = scatter-into-mask . resize-to-bbox, folded into one matrix
    const auto [top, left, bottom, right] = region.bounding_box();
    const std::size_t bh = bottom - top, bw = right - left;
    Tensor interp = bilinear_matrix(pshape[1], pshape[2], bh, bw);
    const std::size_t psize = pshape[1] * pshape[2];
    Tensor paste({3 * plane, 3 * psize}, 0.0);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = top; y < bottom; ++y)
            for (std::size_t x = left; x < right; ++x) {
                if (region.mask.v[y * w + x] < 0.5) continue;
                const double* irow = &interp.v[((y - top) * bw + (x - left)) * psize];
                double* prow = &paste.v[(c * plane + y * w + x) * 3 * psize + c * psize];
                for (std::size_t i = 0; i < psize; ++i) prow[i] = irow[i];
            }
    return g.add_const(g.matvec(paste, patch, {3, h, w}), background);
}

FaceImage Renderer::render_planar(const FaceImage& face, const FaceImage& patch,
                                  const PatchRegion& region) const {
    ad::Graph g;
    ad::Var p = g.input(patch.pixels);
    return FaceImage(g.value(render_ad(g, face, p, region)));
}

FaceImage Renderer::render_uv(const FaceImage& face, const FaceImage& patch,
                              const PatchRegion& region) const {
    if (!provider_)
        throw CapabilityError("render: uv mode requires a 3D reconstruction provider");
    auto landmarks = detector_->detect(face);
    UVMap uv = provider_->reconstruct(face, landmarks);
    Tensor uv_face = face_to_uv(face, uv);
    Tensor patched = apply_patch_in_uv(uv_face, patch.pixels, region);

    const std::size_t h = face.height(), w = face.width();
    const std::size_t plane = h * w;
    const std::size_t tex_plane = uv.tex_h * uv.tex_w;
    FaceImage out = face;
    for (std::size_t i = 0; i < plane; ++i) {
        if (uv.valid.v[i] < 0.5) continue;
        const std::size_t tx = static_cast<std::size_t>(std::lround(uv.u.v[i] * (uv.tex_w - 1)));
        const std::size_t ty = static_cast<std::size_t>(std::lround(uv.v.v[i] * (uv.tex_h - 1)));
        if (region.mask.v[ty * uv.tex_w + tx] < 0.5) continue;
        for (std::size_t c = 0; c < 3; ++c)
            out.pixels.v[c * plane + i] = patched.v[c * tex_plane + ty * uv.tex_w + tx];
    }
    return out;
}

FaceImage Renderer::render(const FaceImage& face, const FaceImage& patch,
                           const PatchRegion& region) const {
    FaceImage out = mode_ == RenderMode::kPlanar ? render_planar(face, patch, region)
                                                 : render_uv(face, patch, region);
    for (auto& x : out.pixels.v) x = std::min(1.0, std::max(0.0, x));
    return out;
}

}  // namespace patchforge
