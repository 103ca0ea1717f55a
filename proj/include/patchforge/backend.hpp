#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "patchforge/autodiff.hpp"
#include "patchforge/image.hpp"
#include "patchforge/schedule.hpp"
#include "patchforge/tensor.hpp"

namespace patchforge {

struct BackendSpec {
    std::size_t latent_c = 3;
    std::size_t latent_h = 8;
    std::size_t latent_w = 8;
    std::size_t image_h = 16;
    std::size_t image_w = 16;
    std::size_t timesteps = 10;
    std::size_t context_dim = 8;  // d in the QK^T / sqrt(d) scaling
    bool deterministic = true;

    std::size_t latent_size() const { return latent_c * latent_h * latent_w; }
    std::size_t image_size() const { return 3 * image_h * image_w; }
    std::vector<std::size_t> latent_shape() const { return {1, latent_c, latent_h, latent_w}; }
};

// Point in latent space annotated with its schedule position.
struct LatentTensor {
    Tensor data;  // [1, C, H, W]
    std::size_t timestep = 0;
};

// Cross-attention maps captured during one controlled denoising step.
struct AttentionRecord {
    struct Entry {
        int layer_id = 0;
        int head_index = 0;
        Tensor map;  // [query_positions, key_positions], softmax rows
    };
    std::vector<Entry> maps;
    std::size_t context_dim = 0;
};

// Latent diffusion backend contract: noise prediction, DDIM transport,
// VAE encode/decode, and the attention-controlled step.
class DiffusionBackend {
public:
    virtual ~DiffusionBackend() = default;

    virtual const BackendSpec& spec() const = 0;
    virtual const NoiseSchedule& schedule() const = 0;

    virtual Tensor predict_noise(const Tensor& latent, std::size_t t,
                                 const Tensor* context = nullptr) = 0;
    virtual LatentTensor vae_encode(const FaceImage& image) = 0;
    virtual FaceImage vae_decode(const LatentTensor& latent) = 0;

    // One DDIM denoising step in which every configured cross-attention
    // layer's key/value context is the feature map of the source latent.
    virtual std::pair<LatentTensor, AttentionRecord> denoise_step_with_source_context(
        const LatentTensor& patch, const LatentTensor& source) = 0;

    LatentTensor ddim_invert(const LatentTensor& latent, std::size_t steps);
    LatentTensor ddim_denoise(const LatentTensor& latent, std::size_t steps);

protected:
    void check_latent(const Tensor& latent) const;
};

// Backends whose denoise step and decoder admit backpropagation. The
// attack engine needs this for analytic gradients and for the analytic
// attention/direction terms in zeroth-order mode.
class DifferentiableBackend : public DiffusionBackend {
public:
    virtual ad::Var ddim_denoise_step_ad(ad::Graph& g, ad::Var latent, std::size_t t,
                                         std::optional<ad::Var> context = std::nullopt,
                                         std::vector<ad::Var>* attention_maps = nullptr) = 0;
    virtual ad::Var vae_decode_ad(ad::Graph& g, ad::Var latent) = 0;
};

// Deterministic desk-scale backend: a seeded linear (or zero) noise
// predictor with optional cross-attention layers, and an average-pool /
// nearest-upsample encoder-decoder pair that is exact on block images.
class StandinBackend : public DifferentiableBackend {
public:
    enum class Predictor { kZero, kLinear };

    struct Options {
        BackendSpec spec;
        Predictor predictor = Predictor::kLinear;
        double predictor_scale = 0.05;
        std::size_t attention_layers = 1;
        double attention_scale = 0.05;
        std::size_t feature_dim = 4;  // channels of the phi feature map
        std::uint64_t seed = 1234;
        std::vector<double> betas;  // empty -> linear schedule over spec.timesteps
    };

    explicit StandinBackend(Options opts);

    const BackendSpec& spec() const override { return opts_.spec; }
    const NoiseSchedule& schedule() const override { return schedule_; }

    Tensor predict_noise(const Tensor& latent, std::size_t t,
                         const Tensor* context = nullptr) override;
    LatentTensor vae_encode(const FaceImage& image) override;
    FaceImage vae_decode(const LatentTensor& latent) override;
    std::pair<LatentTensor, AttentionRecord> denoise_step_with_source_context(
        const LatentTensor& patch, const LatentTensor& source) override;

    // Differentiable paths. The plain virtuals above are thin wrappers over
    // these, so the forward math exists exactly once.
    ad::Var predict_noise_ad(ad::Graph& g, ad::Var latent, std::size_t t,
                             std::optional<ad::Var> context = std::nullopt,
                             std::vector<ad::Var>* attention_maps = nullptr);
    ad::Var ddim_denoise_step_ad(ad::Graph& g, ad::Var latent, std::size_t t,
                                 std::optional<ad::Var> context = std::nullopt,
                                 std::vector<ad::Var>* attention_maps = nullptr) override;
    ad::Var vae_decode_ad(ad::Graph& g, ad::Var latent) override;

    std::size_t attention_layer_count() const { return phi_.size(); }

private:
    Options opts_;
    NoiseSchedule schedule_;
    Tensor predictor_matrix_;           // [n, n]
    std::vector<Tensor> phi_;           // per layer: [P * feature_dim, n]
    std::vector<Tensor> wq_, wk_, wv_;  // [feature_dim, d]
    std::vector<Tensor> wo_;            // [d, C]
    Tensor pos_to_latent_;              // permutation [n, P * C]
    Tensor upsample_matrix_;            // [image_size, n]
    std::size_t positions_;
};

}  // namespace patchforge
