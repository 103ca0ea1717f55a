#include "patchforge/backend.hpp"

#include <cmath>

#include "patchforge/rng.hpp"

namespace patchforge {

void DiffusionBackend::check_latent(const Tensor& latent) const {
    if (latent.shape != spec().latent_shape())
        throw ConfigError("backend: latent shape does not match BackendSpec");
    if (!latent.all_finite()) throw InputError("backend: non-finite latent");
}

namespace {

// Eq. 8 / Eq. 9 step coefficients: x' = (1 + cx) x + ce * eps(x, t).
struct StepCoeffs {
    double cx;
    double ce;
};

StepCoeffs invert_coeffs(const NoiseSchedule& s, std::size_t t) {
    // t -> t + 1
    const double ab_t = s.alpha_bar(t);
    const double ab_n = s.alpha_bar(t + 1);
    StepCoeffs c;
    c.cx = std::sqrt(ab_n) * (std::sqrt(1.0 / ab_t) - std::sqrt(1.0 / ab_n));
    c.ce = std::sqrt(ab_n) * (std::sqrt(1.0 / ab_n - 1.0) - std::sqrt(1.0 / ab_t - 1.0));
    return c;
}

StepCoeffs denoise_coeffs(const NoiseSchedule& s, std::size_t t) {
    // t -> t - 1
    const double ab_t = s.alpha_bar(t);
    const double ab_p = s.alpha_bar(t - 1);
    StepCoeffs c;
    c.cx = std::sqrt(ab_p) * (std::sqrt(1.0 / ab_t) - std::sqrt(1.0 / ab_p));
    c.ce = std::sqrt(ab_p) * (std::sqrt(1.0 / ab_p - 1.0) - std::sqrt(1.0 / ab_t - 1.0));
    return c;
}

Tensor gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    Tensor m({rows, cols}, 0.0);
    for (auto& x : m.v) x = scale * rng.gaussian();
    return m;
}

}  // namespace

LatentTensor DiffusionBackend::ddim_invert(const LatentTensor& latent, std::size_t steps) {
    check_latent(latent.data);
    if (latent.timestep + steps > schedule().T)
        throw RangeError("ddim_invert: steps exceed schedule length");
    LatentTensor out = latent;
    for (std::size_t i = 0; i < steps; ++i) {
        const auto c = invert_coeffs(schedule(), out.timestep);
        Tensor eps = predict_noise(out.data, out.timestep);
        for (std::size_t j = 0; j < out.data.size(); ++j)
            out.data.v[j] = (1.0 + c.cx) * out.data.v[j] + c.ce * eps.v[j];
        ++out.timestep;
    }
    return out;
}

LatentTensor DiffusionBackend::ddim_denoise(const LatentTensor& latent, std::size_t steps) {
    check_latent(latent.data);
    if (steps > latent.timestep)
        throw RangeError("ddim_denoise: steps exceed current timestep");
    LatentTensor out = latent;
    for (std::size_t i = 0; i < steps; ++i) {
        const auto c = denoise_coeffs(schedule(), out.timestep);
        Tensor eps = predict_noise(out.data, out.timestep);
        for (std::size_t j = 0; j < out.data.size(); ++j)
            out.data.v[j] = (1.0 + c.cx) * out.data.v[j] + c.ce * eps.v[j];
        --out.timestep;
    }
    return out;
}

StandinBackend::StandinBackend(Options opts) : opts_(std::move(opts)) {
    const auto& sp = opts_.spec;
    if (sp.latent_c != 3)
        throw ConfigError("standin: latent channel count must equal image channels (3)");
    if (sp.image_h % sp.latent_h != 0 || sp.image_w % sp.latent_w != 0)
        throw ConfigError("standin: image dimensions must be multiples of latent dimensions");
    schedule_ = opts_.betas.empty() ? NoiseSchedule::linear(sp.timesteps)
                                    : NoiseSchedule::from_betas(opts_.betas);
    opts_.spec.timesteps = schedule_.T;
    positions_ = sp.latent_h * sp.latent_w;

    Rng rng(opts_.seed);
    const std::size_t n = sp.latent_size();
    if (opts_.predictor == Predictor::kLinear)
        predictor_matrix_ = gaussian_matrix(
            rng, n, n, opts_.predictor_scale / std::sqrt(static_cast<double>(n)));

    const std::size_t cf = opts_.feature_dim;
    const std::size_t d = sp.context_dim;
    for (std::size_t l = 0; l < opts_.attention_layers; ++l) {
        // phi folds the [C, P] -> [P, cf] projection into one constant matrix
        Tensor wf = gaussian_matrix(rng, sp.latent_c, cf, 1.0 / std::sqrt(3.0));
        Tensor phi({positions_ * cf, n}, 0.0);
        for (std::size_t p = 0; p < positions_; ++p)
            for (std::size_t j = 0; j < cf; ++j)
                for (std::size_t c = 0; c < sp.latent_c; ++c)
                    phi.v[(p * cf + j) * n + (c * positions_ + p)] = wf.v[c * cf + j];
        phi_.push_back(std::move(phi));
        wq_.push_back(gaussian_matrix(rng, cf, d, 1.0 / std::sqrt(static_cast<double>(cf))));
        wk_.push_back(gaussian_matrix(rng, cf, d, 1.0 / std::sqrt(static_cast<double>(cf))));
        wv_.push_back(gaussian_matrix(rng, cf, d, 1.0 / std::sqrt(static_cast<double>(cf))));
        wo_.push_back(gaussian_matrix(rng, d, sp.latent_c, 1.0 / std::sqrt(static_cast<double>(d))));
    }

    pos_to_latent_ = Tensor({n, positions_ * sp.latent_c}, 0.0);
    for (std::size_t p = 0; p < positions_; ++p)
        for (std::size_t c = 0; c < sp.latent_c; ++c)
            pos_to_latent_.v[(c * positions_ + p) * (positions_ * sp.latent_c) +
                             (p * sp.latent_c + c)] = 1.0;

    const std::size_t fh = sp.image_h / sp.latent_h;
    const std::size_t fw = sp.image_w / sp.latent_w;
    upsample_matrix_ = Tensor({sp.image_size(), n}, 0.0);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < sp.image_h; ++y)
            for (std::size_t x = 0; x < sp.image_w; ++x) {
                std::size_t row = c * sp.image_h * sp.image_w + y * sp.image_w + x;
                std::size_t col = c * positions_ + (y / fh) * sp.latent_w + (x / fw);
                upsample_matrix_.v[row * n + col] = 1.0;
            }
}

ad::Var StandinBackend::predict_noise_ad(ad::Graph& g, ad::Var latent, std::size_t t,
                                         std::optional<ad::Var> context,
                                         std::vector<ad::Var>* attention_maps) {
    if (t > schedule_.T) throw RangeError("predict_noise: timestep beyond T");
    const auto& sp = opts_.spec;
    const std::size_t n = sp.latent_size();
    if (g.value(latent).size() != n)
        throw ConfigError("predict_noise: latent shape mismatch");

    ad::Var out = opts_.predictor == Predictor::kZero
                      ? g.constant(Tensor(sp.latent_shape(), 0.0))
                      : g.matvec(predictor_matrix_, latent, sp.latent_shape());

    const std::size_t cf = opts_.feature_dim;
    const std::size_t d = sp.context_dim;
    for (std::size_t l = 0; l < phi_.size(); ++l) {
        ad::Var fq = g.reshape(g.matvec(phi_[l], latent), {positions_, cf});
        ad::Var fkv = context ? g.reshape(g.matvec(phi_[l], *context), {positions_, cf}) : fq;
        ad::Var q = g.rmul_const(fq, wq_[l], d);
        ad::Var k = g.rmul_const(fkv, wk_[l], d);
        ad::Var attn = g.softmax_rows(
            g.scale(g.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d))));
        if (attention_maps) attention_maps->push_back(attn);
        ad::Var v = g.rmul_const(fkv, wv_[l], d);
        ad::Var o = g.rmul_const(g.matmul(attn, v), wo_[l], sp.latent_c);
        ad::Var o_lat =
            g.matvec(pos_to_latent_, g.reshape(o, {positions_ * sp.latent_c}), sp.latent_shape());
        out = g.add_scaled(out, o_lat, opts_.attention_scale);
    }
    return out;
}

ad::Var StandinBackend::ddim_denoise_step_ad(ad::Graph& g, ad::Var latent, std::size_t t,
                                             std::optional<ad::Var> context,
                                             std::vector<ad::Var>* attention_maps) {
    if (t == 0) throw RangeError("ddim_denoise: already at timestep 0");
    const double ab_t = schedule_.alpha_bar(t);
    const double ab_p = schedule_.alpha_bar(t - 1);
    const double cx = std::sqrt(ab_p) * (std::sqrt(1.0 / ab_t) - std::sqrt(1.0 / ab_p));
    const double ce = std::sqrt(ab_p) * (std::sqrt(1.0 / ab_p - 1.0) - std::sqrt(1.0 / ab_t - 1.0));
    ad::Var eps = predict_noise_ad(g, latent, t, context, attention_maps);
    return g.add_scaled(g.scale(latent, 1.0 + cx), eps, ce);
}

Tensor StandinBackend::predict_noise(const Tensor& latent, std::size_t t, const Tensor* context) {
    check_latent(latent);
    ad::Graph g;
    ad::Var x = g.input(latent);
    std::optional<ad::Var> ctx;
    if (context) ctx = g.constant(*context);
    Tensor out = g.value(predict_noise_ad(g, x, t, ctx));
    if (!out.all_finite()) throw BackendFault("predict_noise: non-finite output");
    return out;
}

LatentTensor StandinBackend::vae_encode(const FaceImage& image) {
    const auto& sp = opts_.spec;
    if (image.pixels.shape != std::vector<std::size_t>{3, sp.image_h, sp.image_w})
        throw ConfigError("vae_encode: image shape does not match BackendSpec");
    const std::size_t fh = sp.image_h / sp.latent_h;
    const std::size_t fw = sp.image_w / sp.latent_w;
    LatentTensor out{Tensor(sp.latent_shape(), 0.0), 0};
    const double inv = 1.0 / static_cast<double>(fh * fw);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < sp.latent_h; ++y)
            for (std::size_t x = 0; x < sp.latent_w; ++x) {
                double acc = 0.0;
                for (std::size_t dy = 0; dy < fh; ++dy)
                    for (std::size_t dx = 0; dx < fw; ++dx)
                        acc += image.pixels.v[c * sp.image_h * sp.image_w +
                                              (y * fh + dy) * sp.image_w + (x * fw + dx)];
                out.data.v[c * positions_ + y * sp.latent_w + x] = acc * inv;
            }
    return out;
}

ad::Var StandinBackend::vae_decode_ad(ad::Graph& g, ad::Var latent) {
    const auto& sp = opts_.spec;
    return g.clamp01(g.matvec(upsample_matrix_, latent, {3, sp.image_h, sp.image_w}));
}

FaceImage StandinBackend::vae_decode(const LatentTensor& latent) {
    check_latent(latent.data);
    ad::Graph g;
    ad::Var x = g.input(latent.data);
    return FaceImage(g.value(vae_decode_ad(g, x)));
}

std::pair<LatentTensor, AttentionRecord> StandinBackend::denoise_step_with_source_context(
    const LatentTensor& patch, const LatentTensor& source) {
    check_latent(patch.data);
    check_latent(source.data);
    if (phi_.empty())
        throw CapabilityError("backend has no cross-attention layers to control");

    ad::Graph g;
    ad::Var p = g.input(patch.data);
    ad::Var src = g.constant(source.data);
    std::vector<ad::Var> maps;
    ad::Var stepped = ddim_denoise_step_ad(g, p, patch.timestep, src, &maps);

    AttentionRecord record;
    record.context_dim = opts_.spec.context_dim;
    for (std::size_t l = 0; l < maps.size(); ++l)
        record.maps.push_back({static_cast<int>(l), 0, g.value(maps[l])});
    LatentTensor out{g.value(stepped), patch.timestep - 1};
    if (!out.data.all_finite()) throw BackendFault("denoise step produced non-finite latent");
    return {std::move(out), std::move(record)};
}

}  // namespace patchforge
