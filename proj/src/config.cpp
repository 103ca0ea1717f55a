#include "patchforge/config.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace patchforge {

namespace {

constexpr std::array kKnownKeys = {
    "backend.kind",           "backend.seed",           "backend.timesteps",
    "backend.latent_h",       "backend.latent_w",       "backend.image_h",
    "backend.image_w",        "backend.context_dim",    "backend.predictor",
    "backend.predictor_scale","backend.attention_layers","backend.attention_scale",
    "backend.checkpoint",
    "oracle.kind",            "oracle.dim",             "oracle.seed",
    "oracle.model",           "oracle.host",            "oracle.port",
    "oracle.threshold",
    "renderer.mode",
    "region.top",             "region.left",            "region.bottom",
    "region.right",
    "attack.epochs",          "attack.eta",             "attack.alpha",
    "attack.invert_steps",    "attack.grad_mode",       "attack.zo_samples",
    "attack.zo_sigma",        "attack.seed",            "attack.finalize_decode_direct",
    "loss.lambda_adv",        "loss.lambda_attn",       "loss.lambda_dir",
    "dataset.root",           "eval.pairs",             "eval.seed",
    "out.dir",
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::check_key(const std::string& key) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end())
        throw ConfigError("unknown configuration key: " + key);
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open configuration file: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return from_string(buf.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("configuration line " + std::to_string(lineno) +
                              " is not 'key = value'");
        cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    check_key(key);
    values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    check_key(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    check_key(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError("configuration key " + key + " is not a number: " + it->second);
    }
}

long RunConfig::get_int(const std::string& key, long fallback) const {
    check_key(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stol(it->second);
    } catch (const std::exception&) {
        throw ConfigError("configuration key " + key + " is not an integer: " + it->second);
    }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    check_key(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("configuration key " + key + " is not a boolean: " + it->second);
}

std::string RunConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

std::string RunConfig::hash() const {
    // FNV-1a 64
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::unique_ptr<StandinBackend> RunConfig::make_backend() const {
    const std::string kind = get_string("backend.kind", "standin");
    if (kind == "pretrained")
        throw CapabilityError(
            "pretrained backends need external checkpoints (see backend.checkpoint and "
            "PATCHFORGE_CACHE); this build ships the standin backend");
    if (kind != "standin") throw ConfigError("backend.kind must be standin or pretrained");

    StandinBackend::Options opts;
    opts.spec.latent_h = static_cast<std::size_t>(get_int("backend.latent_h", 8));
    opts.spec.latent_w = static_cast<std::size_t>(get_int("backend.latent_w", 8));
    opts.spec.image_h = static_cast<std::size_t>(get_int("backend.image_h", 16));
    opts.spec.image_w = static_cast<std::size_t>(get_int("backend.image_w", 16));
    opts.spec.timesteps = static_cast<std::size_t>(get_int("backend.timesteps", 10));
    opts.spec.context_dim = static_cast<std::size_t>(get_int("backend.context_dim", 8));
    opts.seed = static_cast<std::uint64_t>(get_int("backend.seed", 1234));
    opts.attention_layers = static_cast<std::size_t>(get_int("backend.attention_layers", 1));
    opts.predictor_scale = get_double("backend.predictor_scale", 0.05);
    opts.attention_scale = get_double("backend.attention_scale", 0.05);
    const std::string predictor = get_string("backend.predictor", "linear");
    if (predictor == "zero")
        opts.predictor = StandinBackend::Predictor::kZero;
    else if (predictor == "linear")
        opts.predictor = StandinBackend::Predictor::kLinear;
    else
        throw ConfigError("backend.predictor must be zero or linear");
    return std::make_unique<StandinBackend>(opts);
}

std::unique_ptr<FrOracle> RunConfig::make_oracle(const BackendSpec& spec) const {
    const std::string kind = get_string("oracle.kind", "linear");
    if (kind == "linear") {
        return std::make_unique<LinearFrOracle>(
            static_cast<std::size_t>(get_int("oracle.dim", 32)), spec.image_size(),
            static_cast<std::uint64_t>(get_int("oracle.seed", 7)),
            get_string("oracle.model", "linear-standin"));
    }
    if (kind == "remote") {
        RemoteFrOracle::Options opts;
        opts.host = get_string("oracle.host", "127.0.0.1");
        opts.port = static_cast<int>(get_int("oracle.port", 0));
        opts.model_id = get_string("oracle.model", "remote");
        opts.expected_dim = static_cast<std::size_t>(get_int("oracle.dim", 0));
        return std::make_unique<RemoteFrOracle>(opts);
    }
    throw ConfigError("oracle.kind must be linear or remote");
}

Renderer RunConfig::make_renderer() const {
    const std::string mode = get_string("renderer.mode", "planar");
    if (mode == "planar") return Renderer(RenderMode::kPlanar);
    if (mode == "uv")
        return Renderer(RenderMode::kUv, std::make_shared<IdentityUvProvider>());
    throw ConfigError("renderer.mode must be planar or uv");
}

PatchRegion RunConfig::make_region(const BackendSpec& spec) const {
    if (!has("region.top") && !has("region.bottom") && !has("region.left") &&
        !has("region.right"))
        return PatchRegion::lower_face(spec.image_h, spec.image_w);
    return PatchRegion::rect(spec.image_h, spec.image_w,
                             static_cast<std::size_t>(get_int("region.top", 0)),
                             static_cast<std::size_t>(get_int("region.left", 0)),
                             static_cast<std::size_t>(get_int("region.bottom", spec.image_h)),
                             static_cast<std::size_t>(get_int("region.right", spec.image_w)));
}

AttackConfig RunConfig::make_attack_config() const {
    AttackConfig cfg;
    cfg.max_epochs = static_cast<int>(get_int("attack.epochs", 200));
    cfg.eta = get_double("attack.eta", 0.01);
    cfg.alpha = get_double("attack.alpha", 0.5);
    cfg.invert_steps = static_cast<std::size_t>(get_int("attack.invert_steps", 5));
    cfg.weights.lambda_adv = get_double("loss.lambda_adv", 10.0);
    cfg.weights.lambda_attn = get_double("loss.lambda_attn", 10000.0);
    cfg.weights.lambda_dir = get_double("loss.lambda_dir", 10.0);
    cfg.zo_samples = static_cast<int>(get_int("attack.zo_samples", 32));
    cfg.zo_sigma = get_double("attack.zo_sigma", 0.01);
    cfg.seed = static_cast<std::uint64_t>(get_int("attack.seed", 0));
    cfg.threshold = get_double("oracle.threshold", 0.8);
    cfg.finalize_decode_direct = get_bool("attack.finalize_decode_direct", false);
    const std::string mode = get_string("attack.grad_mode", "analytic");
    if (mode == "analytic")
        cfg.grad_mode = GradMode::kAnalytic;
    else if (mode == "zeroth_order")
        cfg.grad_mode = GradMode::kZerothOrder;
    else
        throw ConfigError("attack.grad_mode must be analytic or zeroth_order");
    return cfg;
}

}  // namespace patchforge
