#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "patchforge/attack.hpp"

namespace patchforge {

// Identity-disjoint (source, target) image pairs sampled from a dataset
// laid out as <root>/<identity>/<image>.png.
struct PairSet {
    struct Pair {
        std::string source_path;
        std::string target_path;
        std::string source_id;
        std::string target_id;
    };
    std::vector<Pair> pairs;
    std::uint64_t seed = 0;
};

struct PairOutcome {
    std::string source_path;
    std::string target_path;
    bool success = false;
    std::uint64_t nq = 0;
    std::string error;  // empty unless the pair failed to run
};

struct EvalReport {
    double asr = 0.0;
    std::optional<double> mean_nq;  // averaged over successful attacks only
    std::size_t evaluated = 0;
    std::size_t successes = 0;
    std::vector<PairOutcome> per_pair;
    nlohmann::json config_snapshot;
};

struct UniversalityOutcome {
    std::string label;
    bool matched = false;
    std::string error;
};

struct UniversalityReport {
    std::size_t pool_size = 0;
    std::size_t matched = 0;
    std::optional<double> universal_asr;
    // counts excluding pool images that share the patch's source identity
    std::size_t pool_size_exclusive = 0;
    std::size_t matched_exclusive = 0;
    std::optional<double> universal_asr_exclusive;
    std::vector<UniversalityOutcome> per_image;
};

struct AblationToggles {
    bool disable_attn = false;
    bool disable_dir = false;
};

struct AblationReport {
    EvalReport baseline;  // toggles applied
    EvalReport full;      // all losses enabled
    double delta_asr = 0.0;
    std::optional<double> delta_mean_nq;
};

struct EvalComponents {
    DifferentiableBackend* backend = nullptr;
    const Renderer* renderer = nullptr;
    FrOracle* oracle = nullptr;
    PatchRegion region;
};

// Deterministic under (dataset snapshot, n, seed). When a prescreen oracle
// is given, source images failing self-verification against a second
// enrolled image of their identity are dropped; identities with a single
// image are kept with a log entry.
PairSet sample_pairs(const std::string& dataset_root, std::size_t n, std::uint64_t seed,
                     FrOracle* prescreen_oracle = nullptr, double prescreen_threshold = 0.0);

EvalReport evaluate_impersonation(const PairSet& pairs, const AttackConfig& cfg,
                                  const EvalComponents& components);

UniversalityReport universality_eval(const FaceImage& patch, const std::vector<FaceImage>& pool,
                                     const FaceImage& target, const EvalComponents& components,
                                     double threshold,
                                     const std::optional<std::string>& patch_source_id = {});

AblationReport run_ablation(const PairSet& pairs, const AttackConfig& cfg,
                            const AblationToggles& toggles, const EvalComponents& components);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const UniversalityReport& report);
nlohmann::json to_json(const AblationReport& report);

// Plain-text one-row summary table (ASR / NQ columns).
std::string summary_table(const EvalReport& report, const std::string& model,
                          const std::string& dataset);

}  // namespace patchforge
