#include "patchforge/losses.hpp"

#include <cmath>

#include "patchforge/resample.hpp"

namespace patchforge {

ad::Var attention_disruption_loss_ad(ad::Graph& g, const std::vector<ad::Var>& maps) {
    if (maps.empty()) throw InputError("attention_disruption_loss: no attention maps");
    std::size_t h = 0, w = 0;
    for (const auto& m : maps) {
        const auto& s = g.value(m).shape;
        if (s.size() != 2) throw InputError("attention_disruption_loss: map is not 2-D");
        h = std::max(h, s[0]);
        w = std::max(w, s[1]);
    }
    std::vector<ad::Var> resized;
    resized.reserve(maps.size());
    for (const auto& m : maps) {
        const auto& s = g.value(m).shape;
        if (s[0] == h && s[1] == w) {
            resized.push_back(m);
        } else {
            Tensor interp = bilinear_matrix(s[0], s[1], h, w);
            resized.push_back(g.matvec(interp, m, {h, w}));
        }
    }
    return g.variance_all(g.mean_of(resized));
}

double attention_disruption_loss(const AttentionRecord& record) {
    if (record.maps.empty()) throw InputError("attention_disruption_loss: empty record");
    ad::Graph g;
    std::vector<ad::Var> maps;
    maps.reserve(record.maps.size());
    for (const auto& e : record.maps) maps.push_back(g.constant(e.map));
    return g.value(attention_disruption_loss_ad(g, maps)).v[0];
}

ad::Var directional_loss_ad(ad::Graph& g, ad::Var current, const Tensor& initial,
                            const Tensor& enc_src, const Tensor& enc_tar) {
    if (g.value(current).size() != initial.size() || enc_src.size() != enc_tar.size() ||
        initial.size() != enc_src.size())
        throw InputError("directional_loss: inputs are not flattenable to one shape");
    Tensor delta_e = enc_tar - enc_src;
    Tensor neg_initial = initial * -1.0;
    ad::Var delta_i = g.add_const(current, neg_initial);
    if (l2_norm(g.value(delta_i)) < 1e-12 || l2_norm(delta_e) < 1e-12)
        return g.constant(Tensor({1}, {1.0}));
    ad::Var cos = g.dot(g.normalize_l2(delta_i), g.constant(delta_e * (1.0 / l2_norm(delta_e))));
    return g.add_const(g.scale(cos, -1.0), Tensor({1}, {1.0}));
}

double directional_loss(const Tensor& current, const Tensor& initial, const Tensor& enc_src,
                        const Tensor& enc_tar) {
    ad::Graph g;
    return g.value(directional_loss_ad(g, g.input(current), initial, enc_src, enc_tar)).v[0];
}

ad::Var adversarial_loss_ad(ad::Graph& g, ad::Var emb_adv, const Tensor& emb_tar) {
    if (g.value(emb_adv).size() != emb_tar.size())
        throw InputError("adversarial_loss: embedding dimension mismatch");
    if (l2_norm(g.value(emb_adv)) < 1e-12 || l2_norm(emb_tar) < 1e-12)
        throw InputError("adversarial_loss: zero-norm embedding");
    ad::Var cos = g.dot(g.normalize_l2(emb_adv),
                        g.constant(emb_tar * (1.0 / l2_norm(emb_tar))));
    return g.add_const(g.scale(cos, -1.0), Tensor({1}, {1.0}));
}

double adversarial_loss(const Tensor& emb_adv, const Tensor& emb_tar) {
    ad::Graph g;
    return g.value(adversarial_loss_ad(g, g.input(emb_adv), emb_tar)).v[0];
}

double ensemble_adversarial_loss(const std::vector<std::pair<Tensor, Tensor>>& pairs) {
    if (pairs.empty()) throw InputError("ensemble_adversarial_loss: empty pair list");
    double acc = 0.0;
    for (const auto& [a, b] : pairs) {
        if (a.size() != b.size())
            throw InputError("ensemble_adversarial_loss: embedding dimension mismatch");
        const double na = l2_norm(a), nb = l2_norm(b);
        if (na < 1e-12 || nb < 1e-12)
            throw InputError("ensemble_adversarial_loss: zero-norm embedding");
        acc += dot(a, b) / (na * nb);
    }
    return 1.0 - acc / static_cast<double>(pairs.size());
}

double total_loss(double attn, double dir, double adv, const LossWeights& w) {
    if (!std::isfinite(attn) || !std::isfinite(dir) || !std::isfinite(adv))
        throw InputError("total_loss: non-finite component");
    return w.lambda_adv * adv + w.lambda_attn * attn + w.lambda_dir * dir;
}

}  // namespace patchforge
