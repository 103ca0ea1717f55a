#pragma once

#include <array>
#include <memory>
#include <vector>

#include "patchforge/autodiff.hpp"
#include "patchforge/image.hpp"
#include "patchforge/tensor.hpp"

namespace patchforge {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Per-pixel correspondence from a face image into the canonical UV
// unwrapping, plus the texture resolution the coordinates index into.
struct UVMap {
    Tensor u;      // [H, W], values in [0, 1] where valid
    Tensor v;      // [H, W]
    Tensor valid;  // [H, W], {0, 1}
    std::size_t tex_h = 0;
    std::size_t tex_w = 0;

    static UVMap identity(std::size_t h, std::size_t w);
};

// Binary patch region; in UV space for uv mode, image space for planar.
struct PatchRegion {
    Tensor mask;  // [H, W], {0, 1}

    static PatchRegion empty(std::size_t h, std::size_t w);
    static PatchRegion rect(std::size_t h, std::size_t w, std::size_t top, std::size_t left,
                            std::size_t bottom, std::size_t right);
    // Lower-face band covering roughly 40% of face height, the default
    // adversarial-mask geometry.
    static PatchRegion lower_face(std::size_t h, std::size_t w);

    bool is_empty() const;
    // [top, left, bottom, right), throws on empty region
    std::array<std::size_t, 4> bounding_box() const;
};

class LandmarkDetector {
public:
    virtual ~LandmarkDetector() = default;
    virtual std::vector<Point> detect(const FaceImage& image) const = 0;
};

// Stand-in detector: intensity centroid plus fixed fiducial offsets.
// Translation-equivariant on zero-background fixtures; throws
// DetectionError on blank images.
class CentroidLandmarkDetector : public LandmarkDetector {
public:
    std::vector<Point> detect(const FaceImage& image) const override;
};

std::vector<Point> detect_landmarks(const FaceImage& image,
                                    const LandmarkDetector& detector = CentroidLandmarkDetector());

// 3D reconstruction provider: face image + landmarks -> UV map.
class UvProvider {
public:
    virtual ~UvProvider() = default;
    virtual UVMap reconstruct(const FaceImage& image,
                              const std::vector<Point>& landmarks) const = 0;
};

// Stand-in provider returning the identity unwrapping.
class IdentityUvProvider : public UvProvider {
public:
    UVMap reconstruct(const FaceImage& image, const std::vector<Point>&) const override;
};

// Scatter face pixels into UV texture space; invalid texels are zero.
Tensor face_to_uv(const FaceImage& image, const UVMap& uv);

// Hard replacement inside the region (patch resized to the region's
// bounding box); empty region is a logged no-op.
Tensor apply_patch_in_uv(const Tensor& uv_face, const Tensor& patch_pixels,
                         const PatchRegion& region);

enum class RenderMode { kPlanar, kUv };

class Renderer {
public:
    explicit Renderer(RenderMode mode, std::shared_ptr<const UvProvider> provider = nullptr,
                      std::shared_ptr<const LandmarkDetector> detector =
                          std::make_shared<CentroidLandmarkDetector>());

    RenderMode mode() const { return mode_; }

    FaceImage render(const FaceImage& face, const FaceImage& patch,
                     const PatchRegion& region) const;

    // Planar composite on the tape; gradients flow only to patch pixels
    // inside the region.
    ad::Var render_ad(ad::Graph& g, const FaceImage& face, ad::Var patch,
                      const PatchRegion& region) const;

private:
    FaceImage render_planar(const FaceImage& face, const FaceImage& patch,
                            const PatchRegion& region) const;
    FaceImage render_uv(const FaceImage& face, const FaceImage& patch,
                        const PatchRegion& region) const;

    RenderMode mode_;
    std::shared_ptr<const UvProvider> provider_;
    std::shared_ptr<const LandmarkDetector> detector_;
};

}  // namespace patchforge
