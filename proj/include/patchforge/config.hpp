#pragma once

#include <map>
#include <memory>
#include <string>

#include "patchforge/attack.hpp"
#include "patchforge/backend.hpp"
#include "patchforge/oracle.hpp"
#include "patchforge/renderer.hpp"

namespace patchforge {

// Flat dotted-key configuration document:
//
//   # comment
//   attack.eta = 0.01
//   oracle.kind = linear
//
// Unknown keys are rejected before any component loads; command-line
// overrides go through set(). The schema is documented in the README.
class RunConfig {
public:
    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // FNV-1a over the canonical sorted key=value form; recorded in every
    // manifest so a run can be reproduced bit-identically.
    std::string hash() const;
    std::string canonical() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

    // component builders
    std::unique_ptr<StandinBackend> make_backend() const;
    std::unique_ptr<FrOracle> make_oracle(const BackendSpec& spec) const;
    Renderer make_renderer() const;
    PatchRegion make_region(const BackendSpec& spec) const;
    AttackConfig make_attack_config() const;

private:
    static void check_key(const std::string& key);
    std::map<std::string, std::string> values_;
};

}  // namespace patchforge
