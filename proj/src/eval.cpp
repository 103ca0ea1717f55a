#include "patchforge/eval.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "patchforge/png_io.hpp"

namespace fs = std::filesystem;

namespace patchforge {

namespace {

FaceImage load_face(const std::string& path, const std::string& label) {
    return FaceImage(png::to_rgb_tensor(png::read_file(path)), label);
}

}  // namespace

PairSet sample_pairs(const std::string& dataset_root, std::size_t n, std::uint64_t seed,
                     FrOracle* prescreen_oracle, double prescreen_threshold) {
    if (!fs::is_directory(dataset_root))
        throw DatasetError("dataset root is not a directory: " + dataset_root);

    // sorted identity -> sorted image paths, so sampling is a pure function
    // of the dataset snapshot and the seed
    std::map<std::string, std::vector<std::string>> identities;
    for (const auto& entry : fs::directory_iterator(dataset_root)) {
        if (!entry.is_directory()) continue;
        std::vector<std::string> images;
        for (const auto& img : fs::directory_iterator(entry.path()))
            if (img.path().extension() == ".png") images.push_back(img.path().string());
        if (images.empty()) continue;
        std::sort(images.begin(), images.end());
        identities[entry.path().filename().string()] = std::move(images);
    }
    if (identities.size() < 2)
        throw DatasetError("dataset needs at least 2 identities with images");

    struct Src {
        std::string id;
        std::string path;
    };
    std::vector<Src> sources;
    for (const auto& [id, images] : identities) {
        for (const auto& path : images) {
            if (prescreen_oracle) {
                if (images.size() >= 2) {
                    const std::string& other = images[path == images[0] ? 1 : 0];
                    Embedding a = prescreen_oracle->embed(load_face(path, id), "prescreen");
                    Embedding b = prescreen_oracle->embed(load_face(other, id), "prescreen");
                    if (!verify(a, b, prescreen_threshold).match) {
                        std::clog << "sample_pairs: dropping " << path
                                  << " (fails self-verification)\n";
                        continue;
                    }
                } else {
                    std::clog << "sample_pairs: identity " << id
                              << " has a single image, prescreening skipped\n";
                }
            }
            sources.push_back({id, path});
        }
    }

    std::vector<PairSet::Pair> all;
    for (const auto& src : sources)
        for (const auto& [tid, images] : identities) {
            if (tid == src.id) continue;
            for (const auto& tpath : images)
                all.push_back({src.path, tpath, src.id, tid});
        }
    if (n > all.size())
        throw DatasetError("requested " + std::to_string(n) + " pairs but only " +
                           std::to_string(all.size()) + " cross pairs exist");

    Rng rng(seed);
    for (std::size_t i = all.size(); i > 1; --i)
        std::swap(all[i - 1], all[rng.below(i)]);

    PairSet out;
    out.seed = seed;
    out.pairs.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

EvalReport evaluate_impersonation(const PairSet& pairs, const AttackConfig& cfg,
                                  const EvalComponents& components) {
    EvalReport report;
    AttackEngine engine(*components.backend, *components.renderer, *components.oracle,
                        components.region);
    for (const auto& pair : pairs.pairs) {
        PairOutcome outcome;
        outcome.source_path = pair.source_path;
        outcome.target_path = pair.target_path;
        try {
            FaceImage src = load_face(pair.source_path, pair.source_id);
            FaceImage tar = load_face(pair.target_path, pair.target_id);
            AttackResult r = engine.run_attack(src, tar, cfg);
            outcome.success = r.success;
            outcome.nq = r.nq;
        } catch (const Error& e) {
            outcome.error = e.what();  // recorded, sweep continues
        }
        report.per_pair.push_back(std::move(outcome));
    }

    report.evaluated = report.per_pair.size();
    std::uint64_t nq_sum = 0;
    for (const auto& o : report.per_pair)
        if (o.success) {
            ++report.successes;
            nq_sum += o.nq;
        }
    report.asr = report.evaluated == 0
                     ? 0.0
                     : static_cast<double>(report.successes) / static_cast<double>(report.evaluated);
    if (report.successes > 0)
        report.mean_nq = static_cast<double>(nq_sum) / static_cast<double>(report.successes);
    return report;
}

UniversalityReport universality_eval(const FaceImage& patch, const std::vector<FaceImage>& pool,
                                     const FaceImage& target, const EvalComponents& components,
                                     double threshold,
                                     const std::optional<std::string>& patch_source_id) {
    UniversalityReport report;
    report.pool_size = pool.size();
    Embedding target_emb = components.oracle->embed(target, "universality-target");
    for (const auto& face : pool) {
        UniversalityOutcome outcome;
        outcome.label = face.label.value_or("");
        try {
            FaceImage adv = components.renderer->render(face, patch, components.region);
            Embedding emb = components.oracle->embed(adv, "universality");
            outcome.matched = verify(emb, target_emb, threshold).match;
        } catch (const Error& e) {
            outcome.error = e.what();
        }
        if (outcome.matched) ++report.matched;
        const bool same_identity =
            patch_source_id && face.label && *face.label == *patch_source_id;
        if (!same_identity) {
            ++report.pool_size_exclusive;
            if (outcome.matched) ++report.matched_exclusive;
        }
        report.per_image.push_back(std::move(outcome));
    }
    if (report.pool_size > 0)
        report.universal_asr =
            static_cast<double>(report.matched) / static_cast<double>(report.pool_size);
    if (report.pool_size_exclusive > 0)
        report.universal_asr_exclusive = static_cast<double>(report.matched_exclusive) /
                                         static_cast<double>(report.pool_size_exclusive);
    return report;
}

AblationReport run_ablation(const PairSet& pairs, const AttackConfig& cfg,
                            const AblationToggles& toggles, const EvalComponents& components) {
    AttackConfig toggled = cfg;
    if (toggles.disable_attn) toggled.weights.lambda_attn = 0.0;
    if (toggles.disable_dir) toggled.weights.lambda_dir = 0.0;

    AblationReport report;
    report.full = evaluate_impersonation(pairs, cfg, components);
    report.baseline = evaluate_impersonation(pairs, toggled, components);
    report.delta_asr = report.full.asr - report.baseline.asr;
    if (report.full.mean_nq && report.baseline.mean_nq)
        report.delta_mean_nq = *report.full.mean_nq - *report.baseline.mean_nq;
    return report;
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json j;
    j["asr"] = report.asr;
    j["mean_nq"] = report.mean_nq ? nlohmann::json(*report.mean_nq) : nlohmann::json(nullptr);
    j["evaluated"] = report.evaluated;
    j["successes"] = report.successes;
    j["per_pair"] = nlohmann::json::array();
    for (const auto& o : report.per_pair)
        j["per_pair"].push_back({{"source", o.source_path},
                                 {"target", o.target_path},
                                 {"success", o.success},
                                 {"nq", o.nq},
                                 {"error", o.error}});
    if (!report.config_snapshot.is_null()) j["config"] = report.config_snapshot;
    return j;
}

nlohmann::json to_json(const UniversalityReport& report) {
    nlohmann::json j;
    j["pool_size"] = report.pool_size;
    j["matched"] = report.matched;
    j["universal_asr"] =
        report.universal_asr ? nlohmann::json(*report.universal_asr) : nlohmann::json(nullptr);
    j["pool_size_exclusive"] = report.pool_size_exclusive;
    j["matched_exclusive"] = report.matched_exclusive;
    j["universal_asr_exclusive"] = report.universal_asr_exclusive
                                       ? nlohmann::json(*report.universal_asr_exclusive)
                                       : nlohmann::json(nullptr);
    j["per_image"] = nlohmann::json::array();
    for (const auto& o : report.per_image)
        j["per_image"].push_back({{"label", o.label}, {"matched", o.matched}, {"error", o.error}});
    return j;
}

nlohmann::json to_json(const AblationReport& report) {
    nlohmann::json j;
    j["full"] = to_json(report.full);
    j["baseline"] = to_json(report.baseline);
    j["delta_asr"] = report.delta_asr;
    j["delta_mean_nq"] =
        report.delta_mean_nq ? nlohmann::json(*report.delta_mean_nq) : nlohmann::json(nullptr);
    return j;
}

std::string summary_table(const EvalReport& report, const std::string& model,
                          const std::string& dataset) {
    std::ostringstream out;
    out << "Model      Dataset     ASR       NQ\n";
    out << "---------  ----------  --------  --------\n";
    char asr[32];
    std::snprintf(asr, sizeof(asr), "%.2f%%", report.asr * 100.0);
    out << model;
    for (std::size_t i = model.size(); i < 11; ++i) out << ' ';
    out << dataset;
    for (std::size_t i = dataset.size(); i < 12; ++i) out << ' ';
    out << asr;
    for (std::size_t i = std::string(asr).size(); i < 10; ++i) out << ' ';
    if (report.mean_nq) {
        char nq[32];
        std::snprintf(nq, sizeof(nq), "%.2f", *report.mean_nq);
        out << nq;
    } else {
        out << "n/a";
    }
    out << "\n";
    return out.str();
}

}  // namespace patchforge
