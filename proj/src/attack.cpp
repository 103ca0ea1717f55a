#include "patchforge/attack.hpp"

#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

namespace patchforge {

void AttackConfig::validate(std::size_t schedule_length) const {
    if (max_epochs < 1) throw ConfigError("AttackConfig: max_epochs must be >= 1");
    if (!(eta > 0.0)) throw ConfigError("AttackConfig: eta must be positive");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("AttackConfig: alpha must lie in [0, 1]");
    if (invert_steps > schedule_length)
        throw ConfigError("AttackConfig: invert_steps exceeds schedule length");
    if (weights.lambda_adv < 0.0 || weights.lambda_attn < 0.0 || weights.lambda_dir < 0.0)
        throw ConfigError("AttackConfig: loss weights must be nonnegative");
    if (grad_mode == GradMode::kZerothOrder) {
        if (zo_samples < 1) throw ConfigError("AttackConfig: zo_samples must be >= 1");
        if (!(zo_sigma > 0.0)) throw ConfigError("AttackConfig: zo_sigma must be positive");
    }
}

Tensor estimate_black_box_gradient(const std::function<double(const Tensor&)>& loss,
                                   const Tensor& p, int k, double sigma, std::uint64_t seed) {
    if (k < 1) throw ConfigError("estimate_black_box_gradient: k must be >= 1");
    if (!(sigma > 0.0)) throw ConfigError("estimate_black_box_gradient: sigma must be positive");
    Rng rng(seed);
    Tensor grad(p.shape, 0.0);
    Tensor probe = p;
    for (int i = 0; i < k; ++i) {
        Tensor u(p.shape, 0.0);
        for (auto& x : u.v) x = rng.gaussian();
        for (std::size_t j = 0; j < p.size(); ++j) probe.v[j] = p.v[j] + sigma * u.v[j];
        const double plus = loss(probe);
        for (std::size_t j = 0; j < p.size(); ++j) probe.v[j] = p.v[j] - sigma * u.v[j];
        const double minus = loss(probe);
        const double scale = (plus - minus) / (2.0 * static_cast<double>(k) * sigma);
        for (std::size_t j = 0; j < p.size(); ++j) grad.v[j] += scale * u.v[j];
    }
    return grad;
}

AttackEngine::AttackEngine(DifferentiableBackend& backend, const Renderer& renderer,
                           FrOracle& oracle, PatchRegion region)
    : backend_(backend), renderer_(renderer), oracle_(oracle), region_(std::move(region)) {}

PatchState AttackEngine::init_patch(const FaceImage& x, const FaceImage& x_tar,
                                    const AttackConfig& cfg) const {
    cfg.validate(backend_.schedule().T);
    LatentTensor x_t = backend_.ddim_invert(backend_.vae_encode(x), cfg.invert_steps);
    LatentTensor x_t_tar = backend_.ddim_invert(backend_.vae_encode(x_tar), cfg.invert_steps);
    PatchState state;
    state.p0 = x_t.data * (1.0 - cfg.alpha) + x_t_tar.data * cfg.alpha;
    state.current = state.p0;
    state.timestep = cfg.invert_steps;
    state.epoch = 0;
    return state;
}

EpochOutcome AttackEngine::attack_epoch(PatchState& state, const EpochContext& ctx,
                                        const AttackConfig& cfg, Rng& zo_rng) {
    if (state.epoch >= cfg.max_epochs)
        throw RangeError("attack_epoch: epoch budget exhausted");
    if (state.timestep == 0)
        throw RangeError("attack_epoch: patch latent already at timestep 0");

    ad::Graph g;
    ad::Var p = g.input(state.current);
    ad::Var src = g.constant(ctx.source_latent.data);
    std::vector<ad::Var> maps;
    ad::Var stepped = backend_.ddim_denoise_step_ad(g, p, state.timestep, src, &maps);
    if (maps.empty())
        throw CapabilityError("attack_epoch: backend exposes no cross-attention layers");

    ad::Var l_attn = attention_disruption_loss_ad(g, maps);
    ad::Var l_dir = directional_loss_ad(g, stepped, state.p0, ctx.enc_src, ctx.enc_tar);
    ad::Var decoded = backend_.vae_decode_ad(g, stepped);
    ad::Var adv_face = renderer_.render_ad(g, *ctx.source_face, decoded, region_);

    LossReport report;
    report.attn = g.value(l_attn).v[0];
    report.dir = g.value(l_dir).v[0];

    Tensor grad;
    double similarity = 0.0;
    if (cfg.grad_mode == GradMode::kAnalytic) {
        auto* diff_oracle = dynamic_cast<DifferentiableFrOracle*>(&oracle_);
        if (!diff_oracle)
            throw CapabilityError(
                "analytic grad mode requires a differentiable oracle; use zeroth_order");
        ad::Var emb = diff_oracle->embed_ad(g, adv_face, "adv");
        ad::Var l_adv = adversarial_loss_ad(g, emb, ctx.target_embedding.vector);
        report.adv = g.value(l_adv).v[0];
        similarity = 1.0 - report.adv;
        ad::Var total = g.add(g.add(g.scale(l_adv, cfg.weights.lambda_adv),
                                    g.scale(l_attn, cfg.weights.lambda_attn)),
                              g.scale(l_dir, cfg.weights.lambda_dir));
        g.backward(total);
        grad = g.grad(p);
    } else {
        // attention/direction gradients stay analytic; only the adversarial
        // term is estimated by queries
        ad::Var partial = g.add(g.scale(l_attn, cfg.weights.lambda_attn),
                                g.scale(l_dir, cfg.weights.lambda_dir));
        g.backward(partial);
        grad = g.grad(p);

        const std::uint64_t probe_seed = zo_rng.next_u64();
        auto adv_loss_at = [&](const Tensor& latent) {
            LatentTensor lt{latent, state.timestep};
            auto [stepped_plain, rec] =
                backend_.denoise_step_with_source_context(lt, ctx.source_latent);
            FaceImage patch_img = backend_.vae_decode(stepped_plain);
            FaceImage adv = renderer_.render(*ctx.source_face, patch_img, region_);
            Embedding e = oracle_.embed(adv, "zo-probe");
            return adversarial_loss(e.vector, ctx.target_embedding.vector);
        };
        Tensor g_adv = estimate_black_box_gradient(adv_loss_at, state.current, cfg.zo_samples,
                                                   cfg.zo_sigma, probe_seed);
        for (std::size_t i = 0; i < grad.size(); ++i)
            grad.v[i] += cfg.weights.lambda_adv * g_adv.v[i];

        Embedding emb = oracle_.embed(FaceImage(g.value(adv_face)), "adv");
        report.adv = adversarial_loss(emb.vector, ctx.target_embedding.vector);
        similarity = 1.0 - report.adv;
    }

    report.total = total_loss(report.attn, report.dir, report.adv, cfg.weights);

    // all queries succeeded; mutate state only now
    for (std::size_t i = 0; i < state.current.size(); ++i)
        state.current.v[i] -= cfg.eta * grad.v[i];
    state.epoch += 1;
    report.epoch = state.epoch;

    FRDecision decision{similarity, cfg.threshold, similarity >= cfg.threshold};
    return {report, decision};
}

FaceImage AttackEngine::finalize_patch(const PatchState& state, const AttackConfig& cfg) const {
    LatentTensor latent{state.current, state.timestep};
    if (cfg.finalize_decode_direct) return backend_.vae_decode(latent);
    return backend_.vae_decode(backend_.ddim_denoise(latent, state.timestep));
}

AttackResult AttackEngine::run_attack(const FaceImage& x, const FaceImage& x_tar,
                                      const AttackConfig& cfg, std::ostream* epoch_log) {
    cfg.validate(backend_.schedule().T);
    const std::uint64_t queries_before = oracle_.query_log().count();

    LatentTensor enc_src = backend_.vae_encode(x);
    LatentTensor enc_tar = backend_.vae_encode(x_tar);
    PatchState state = init_patch(x, x_tar, cfg);

    EpochContext ctx;
    ctx.source_latent = backend_.ddim_invert(enc_src, cfg.invert_steps);
    ctx.enc_src = enc_src.data;
    ctx.enc_tar = enc_tar.data;
    ctx.target_embedding = oracle_.embed(x_tar, "target");
    ctx.source_face = &x;

    Rng zo_rng(cfg.seed);
    AttackResult result;
    bool matched = false;
    while (state.epoch < cfg.max_epochs && !matched) {
        EpochOutcome outcome = attack_epoch(state, ctx, cfg, zo_rng);
        result.similarity_trace.push_back(outcome.decision.similarity);
        result.loss_trace.push_back(outcome.report);
        matched = outcome.decision.match;
        if (epoch_log) {
            nlohmann::json line;
            line["epoch"] = outcome.report.epoch;
            line["l_attn"] = outcome.report.attn;
            line["l_dir"] = outcome.report.dir;
            line["l_adv"] = outcome.report.adv;
            line["total"] = outcome.report.total;
            line["similarity"] = outcome.decision.similarity;
            line["queries_so_far"] = oracle_.query_log().count() - queries_before;
            (*epoch_log) << line.dump() << "\n";
        }
    }

    result.success = matched;
    result.epochs_used = state.epoch;
    result.nq = oracle_.query_log().count() - queries_before;
    result.final_patch = finalize_patch(state, cfg);
    result.final_adv_face = renderer_.render(x, result.final_patch, region_);
    return result;
}

}  // namespace patchforge
