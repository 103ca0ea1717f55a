#pragma once

#include <utility>
#include <vector>

#include "patchforge/autodiff.hpp"
#include "patchforge/backend.hpp"
#include "patchforge/tensor.hpp"

namespace patchforge {

struct LossWeights {
    double lambda_adv = 10.0;
    double lambda_attn = 10000.0;
    double lambda_dir = 10.0;
};

struct LossReport {
    double attn = 0.0;
    double dir = 0.0;
    double adv = 0.0;
    double total = 0.0;
    int epoch = 0;
};

// Variance over the entries of the mean captured attention map. Maps from
// different layers are bilinearly resized to the largest recorded grid
// before averaging.
double attention_disruption_loss(const AttentionRecord& record);
ad::Var attention_disruption_loss_ad(ad::Graph& g, const std::vector<ad::Var>& maps);

// 1 - cos(p_m - p_0, enc_tar - enc_src). Degenerate directions (norm below
// 1e-12) yield the neutral value 1 with no gradient, so epoch 0 evaluation
// at p_m == p_0 is well defined.
double directional_loss(const Tensor& current, const Tensor& initial,
                        const Tensor& enc_src, const Tensor& enc_tar);
ad::Var directional_loss_ad(ad::Graph& g, ad::Var current, const Tensor& initial,
                            const Tensor& enc_src, const Tensor& enc_tar);

// 1 - cos(a, b) on embedding vectors; zero-norm inputs violate the oracle
// contract.
double adversarial_loss(const Tensor& emb_adv, const Tensor& emb_tar);
ad::Var adversarial_loss_ad(ad::Graph& g, ad::Var emb_adv, const Tensor& emb_tar);

// 1 - (1/N) sum cos(adv_i, tar_i)
double ensemble_adversarial_loss(const std::vector<std::pair<Tensor, Tensor>>& pairs);

double total_loss(double attn, double dir, double adv, const LossWeights& w);

}  // namespace patchforge
