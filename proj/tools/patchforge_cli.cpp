#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "patchforge/attack.hpp"
#include "patchforge/config.hpp"
#include "patchforge/eval.hpp"
#include "patchforge/oracle_server.hpp"
#include "patchforge/png_io.hpp"

namespace fs = std::filesystem;
using namespace patchforge;

namespace {

// 0 ok, 1 configuration error, 2 component/transport error, 3 attack failed
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitComponent = 2;
constexpr int kExitAttackFailed = 3;

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg = RunConfig::from_file(path);
    for (const auto& kv : overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

FaceImage load_face_checked(const std::string& path, const std::string& label) {
    if (!fs::exists(path)) throw ConfigError("image path does not exist: " + path);
    return FaceImage(png::to_rgb_tensor(png::read_file(path)), label);
}

nlohmann::json config_snapshot(const RunConfig& cfg) {
    nlohmann::json j;
    for (const auto& [k, v] : cfg.entries()) j[k] = v;
    j["config_hash"] = cfg.hash();
    return j;
}

struct Components {
    std::unique_ptr<StandinBackend> backend;
    std::unique_ptr<FrOracle> oracle;
    std::unique_ptr<Renderer> renderer;
    PatchRegion region;
    AttackConfig attack;
};

Components build_components(const RunConfig& cfg) {
    Components c;
    c.backend = cfg.make_backend();
    c.oracle = cfg.make_oracle(c.backend->spec());
    c.renderer = std::make_unique<Renderer>(cfg.make_renderer());
    c.region = cfg.make_region(c.backend->spec());
    c.attack = cfg.make_attack_config();
    return c;
}

fs::path prepare_run_dir(const std::string& out, const RunConfig& cfg) {
    fs::path dir = fs::path(out) / (cfg.hash() + "-" + std::to_string(static_cast<unsigned long long>(
                                                          cfg.make_attack_config().seed)));
    fs::create_directories(dir);
    return dir;
}

int cmd_attack(const RunConfig& cfg, const std::string& source, const std::string& target,
               const std::string& out) {
    Components c = build_components(cfg);
    FaceImage src = load_face_checked(source, "source");
    FaceImage tar = load_face_checked(target, "target");

    fs::path dir = prepare_run_dir(out, cfg);
    std::ofstream epoch_log(dir / "epochs.jsonl");
    AttackEngine engine(*c.backend, *c.renderer, *c.oracle, c.region);
    AttackResult result = engine.run_attack(src, tar, c.attack, &epoch_log);

    png::write_file((dir / "patch.png").string(), png::from_rgb_tensor(result.final_patch.pixels));
    png::write_file((dir / "adv_face.png").string(),
                    png::from_rgb_tensor(result.final_adv_face.pixels));

    nlohmann::json manifest;
    manifest["config"] = config_snapshot(cfg);
    manifest["source"] = source;
    manifest["target"] = target;
    manifest["success"] = result.success;
    manifest["nq"] = result.nq;
    manifest["epochs_used"] = result.epochs_used;
    manifest["similarity_trace"] = result.similarity_trace;
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";

    std::cout << (result.success ? "attack succeeded" : "attack failed") << " after "
              << result.epochs_used << " epochs, nq=" << result.nq << "\n"
              << "artifacts: " << dir.string() << "\n";
    return result.success ? kExitOk : kExitAttackFailed;
}

int cmd_eval(const RunConfig& cfg, const std::string& out, bool prescreen) {
    Components c = build_components(cfg);
    const std::string root = cfg.get_string("dataset.root", "");
    if (root.empty()) throw ConfigError("eval requires dataset.root");
    PairSet pairs = sample_pairs(root, static_cast<std::size_t>(cfg.get_int("eval.pairs", 10)),
                                 static_cast<std::uint64_t>(cfg.get_int("eval.seed", 0)),
                                 prescreen ? c.oracle.get() : nullptr, c.attack.threshold);
    EvalComponents ec{c.backend.get(), c.renderer.get(), c.oracle.get(), c.region};
    EvalReport report = evaluate_impersonation(pairs, c.attack, ec);
    report.config_snapshot = config_snapshot(cfg);

    fs::path dir = prepare_run_dir(out, cfg);
    std::ofstream(dir / "report.json") << to_json(report).dump(2) << "\n";
    std::string table = summary_table(report, c.oracle->model_id(), fs::path(root).filename().string());
    std::ofstream(dir / "summary.txt") << table;
    std::cout << table << "artifacts: " << dir.string() << "\n";
    return kExitOk;
}

int cmd_universality(const RunConfig& cfg, const std::string& patch_path,
                     const std::string& target_path, const std::string& pool_dir,
                     const std::string& out, const std::string& source_id) {
    Components c = build_components(cfg);
    FaceImage patch = load_face_checked(patch_path, "patch");
    FaceImage target = load_face_checked(target_path, "target");
    if (!fs::is_directory(pool_dir)) throw ConfigError("pool path is not a directory: " + pool_dir);

    std::vector<FaceImage> pool;
    std::vector<fs::path> entries(fs::directory_iterator(pool_dir), fs::directory_iterator{});
    std::sort(entries.begin(), entries.end());
    for (const auto& entry : entries) {
        if (fs::is_directory(entry)) {
            std::vector<fs::path> imgs(fs::directory_iterator(entry), fs::directory_iterator{});
            std::sort(imgs.begin(), imgs.end());
            for (const auto& img : imgs)
                if (img.extension() == ".png")
                    pool.push_back(FaceImage(png::to_rgb_tensor(png::read_file(img.string())),
                                             entry.filename().string()));
        } else if (entry.extension() == ".png") {
            pool.push_back(FaceImage(png::to_rgb_tensor(png::read_file(entry.string())),
                                     entry.stem().string()));
        }
    }

    EvalComponents ec{c.backend.get(), c.renderer.get(), c.oracle.get(), c.region};
    UniversalityReport report = universality_eval(
        patch, pool, target, ec, c.attack.threshold,
        source_id.empty() ? std::nullopt : std::optional<std::string>(source_id));

    fs::path dir = prepare_run_dir(out, cfg);
    std::ofstream(dir / "universality.json") << to_json(report).dump(2) << "\n";
    std::cout << "pool=" << report.pool_size << " matched=" << report.matched;
    if (report.universal_asr) std::cout << " universal_asr=" << *report.universal_asr;
    std::cout << "\nartifacts: " << dir.string() << "\n";
    return kExitOk;
}

int cmd_ablate(RunConfig cfg, const std::string& out, bool disable_attn, bool disable_dir,
               bool prescreen) {
    if (!disable_attn && !disable_dir)
        throw ConfigError("ablate requires --disable-attn and/or --disable-dir");
    // effective config dump reflects the zeroed weights
    if (disable_attn) cfg.set("loss.lambda_attn", "0");
    if (disable_dir) cfg.set("loss.lambda_dir", "0");

    Components c = build_components(cfg);
    const std::string root = cfg.get_string("dataset.root", "");
    if (root.empty()) throw ConfigError("ablate requires dataset.root");
    PairSet pairs = sample_pairs(root, static_cast<std::size_t>(cfg.get_int("eval.pairs", 10)),
                                 static_cast<std::uint64_t>(cfg.get_int("eval.seed", 0)),
                                 prescreen ? c.oracle.get() : nullptr, c.attack.threshold);

    // full run re-enables the toggled weights
    AttackConfig full_cfg = c.attack;
    AttackConfig defaults = RunConfig::from_string("").make_attack_config();
    if (disable_attn) full_cfg.weights.lambda_attn = defaults.weights.lambda_attn;
    if (disable_dir) full_cfg.weights.lambda_dir = defaults.weights.lambda_dir;

    EvalComponents ec{c.backend.get(), c.renderer.get(), c.oracle.get(), c.region};
    AblationReport report = run_ablation(pairs, full_cfg,
                                         AblationToggles{disable_attn, disable_dir}, ec);
    nlohmann::json j = to_json(report);
    j["effective_config"] = config_snapshot(cfg);

    fs::path dir = prepare_run_dir(out, cfg);
    std::ofstream(dir / "ablation.json") << j.dump(2) << "\n";
    std::cout << "full: asr=" << report.full.asr
              << " baseline(toggled): asr=" << report.baseline.asr << "\n"
              << "artifacts: " << dir.string() << "\n";
    return kExitOk;
}

int cmd_serve_oracle(const RunConfig& cfg, int port, const std::string& model, int dim,
                     std::uint64_t seed) {
    auto backend = cfg.make_backend();
    auto oracle = std::make_shared<LinearFrOracle>(static_cast<std::size_t>(dim),
                                                   backend->spec().image_size(), seed, model);
    OracleStubServer server(
        [oracle](const FaceImage& img, const std::string&) {
            return oracle->embed(img, "serve").vector;
        },
        /*log_requests=*/true);
    if (!server.start(port)) {
        std::cerr << "serve-oracle: cannot bind port " << port << "\n";
        return kExitComponent;
    }
    std::cout << "serving " << model << " (dim " << dim << ") on 127.0.0.1:"
              << server.bound_port() << std::endl;
    static std::atomic<bool> stop{false};
    std::signal(SIGINT, [](int) { stop.store(true); });
    std::signal(SIGTERM, [](int) { stop.store(true); });
    while (!stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return kExitOk;
}

template <typename F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitComponent;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitComponent;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"patchforge: semantic adversarial patch toolkit for FR robustness testing"};
    app.require_subcommand(1);

    std::string config_path, source, target, out = "runs", patch_path, pool_dir, source_id;
    std::vector<std::string> overrides;
    bool disable_attn = false, disable_dir = false, prescreen = false;
    int port = 8787, dim = 32;
    std::string model = "linear-standin";
    std::uint64_t serve_seed = 7;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "configuration file")->required();
        sub->add_option("--set", overrides, "override: key=value (repeatable)");
        sub->add_option("-o,--out", out, "output directory");
    };

    auto* attack = app.add_subcommand("attack", "run a single impersonation attack");
    add_common(attack);
    attack->add_option("--source", source, "source face PNG")->required();
    attack->add_option("--target", target, "target face PNG")->required();

    auto* eval = app.add_subcommand("eval", "impersonation sweep over sampled pairs");
    add_common(eval);
    eval->add_flag("--prescreen", prescreen, "drop sources failing self-verification");

    auto* uni = app.add_subcommand("universality", "apply one patch across a face pool");
    add_common(uni);
    uni->add_option("--patch", patch_path, "patch PNG")->required();
    uni->add_option("--target", target, "target face PNG")->required();
    uni->add_option("--pool", pool_dir, "pool directory of PNGs")->required();
    uni->add_option("--source-id", source_id, "patch's source identity (for exclusive rate)");

    auto* ablate = app.add_subcommand("ablate", "paired runs with loss terms toggled off");
    add_common(ablate);
    ablate->add_flag("--disable-attn", disable_attn, "zero the attention-disruption weight");
    ablate->add_flag("--disable-dir", disable_dir, "zero the directional weight");
    ablate->add_flag("--prescreen", prescreen, "drop sources failing self-verification");

    auto* serve = app.add_subcommand("serve-oracle", "loopback embedding service stub");
    serve->add_option("-c,--config", config_path, "configuration file")->required();
    serve->add_option("--set", overrides, "override: key=value (repeatable)");
    serve->add_option("--port", port, "listen port");
    serve->add_option("--model", model, "model id");
    serve->add_option("--dim", dim, "embedding dimension");
    serve->add_option("--seed", serve_seed, "oracle seed");

    CLI11_PARSE(app, argc, argv);

    return guarded([&]() -> int {
        RunConfig cfg = load_config(config_path, overrides);
        if (attack->parsed()) return cmd_attack(cfg, source, target, out);
        if (eval->parsed()) return cmd_eval(cfg, out, prescreen);
        if (uni->parsed())
            return cmd_universality(cfg, patch_path, target, pool_dir, out, source_id);
        if (ablate->parsed()) return cmd_ablate(cfg, out, disable_attn, disable_dir, prescreen);
        if (serve->parsed()) return cmd_serve_oracle(cfg, port, model, dim, serve_seed);
        return kExitConfig;
    });
}
