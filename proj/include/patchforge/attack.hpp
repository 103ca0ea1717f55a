#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "patchforge/backend.hpp"
#include "patchforge/losses.hpp"
#include "patchforge/oracle.hpp"
#include "patchforge/renderer.hpp"
#include "patchforge/rng.hpp"

namespace patchforge {

enum class GradMode { kAnalytic, kZerothOrder };

struct AttackConfig {
    int max_epochs = 200;         // N
    double eta = 0.01;            // learning rate
    double alpha = 0.5;           // latent mixing weight
    std::size_t invert_steps = 5; // t
    LossWeights weights;
    GradMode grad_mode = GradMode::kAnalytic;
    int zo_samples = 32;          // k probe pairs
    double zo_sigma = 0.01;
    std::uint64_t seed = 0;
    double threshold = 0.8;
    bool finalize_decode_direct = false;

    void validate(std::size_t schedule_length) const;
};

// Optimizable patch latent plus its frozen initialization.
struct PatchState {
    Tensor p0;
    Tensor current;
    std::size_t timestep = 0;
    int epoch = 0;
};

struct AttackResult {
    bool success = false;
    std::uint64_t nq = 0;
    int epochs_used = 0;
    std::vector<double> similarity_trace;
    std::vector<LossReport> loss_trace;
    FaceImage final_patch;
    FaceImage final_adv_face;
};

struct EpochOutcome {
    LossReport report;
    FRDecision decision;
};

// Antithetic Gaussian zeroth-order estimator:
//   g ~= (1 / 2 k sigma) sum_i [L(p + sigma u_i) - L(p - sigma u_i)] u_i
// Consumes exactly 2k evaluations of `loss`.
Tensor estimate_black_box_gradient(const std::function<double(const Tensor&)>& loss,
                                   const Tensor& p, int k, double sigma, std::uint64_t seed);

class AttackEngine {
public:
    AttackEngine(DifferentiableBackend& backend, const Renderer& renderer, FrOracle& oracle,
                 PatchRegion region);

    // DDIM-invert both faces and mix: p0 = (1 - alpha) x_t + alpha x_t^tar
    PatchState init_patch(const FaceImage& x, const FaceImage& x_tar,
                          const AttackConfig& cfg) const;

    struct EpochContext {
        LatentTensor source_latent;   // x_t, attention context for every step
        Tensor enc_src;               // E(x)
        Tensor enc_tar;               // E(x_tar)
        Embedding target_embedding;   // fetched once, cached
        const FaceImage* source_face = nullptr;
    };

    // One controlled denoise step, the three losses, one metered adversarial
    // query, and a gradient update of the pre-step latent. A failing oracle
    // aborts the epoch with the state untouched.
    EpochOutcome attack_epoch(PatchState& state, const EpochContext& ctx,
                              const AttackConfig& cfg, Rng& zo_rng);

    // Default: denoise the remaining timestep distance before decoding.
    // decode_direct reproduces the literal decode-at-current-step variant.
    FaceImage finalize_patch(const PatchState& state, const AttackConfig& cfg) const;

    AttackResult run_attack(const FaceImage& x, const FaceImage& x_tar, const AttackConfig& cfg,
                            std::ostream* epoch_log = nullptr);

    const PatchRegion& region() const { return region_; }

private:
    DifferentiableBackend& backend_;
    const Renderer& renderer_;
    FrOracle& oracle_;
    PatchRegion region_;
};

}  // namespace patchforge
