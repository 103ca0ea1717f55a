#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "patchforge/config.hpp"

using namespace patchforge;

TEST_CASE("parsing, comments and type accessors") {
    RunConfig cfg = RunConfig::from_string(R"(
# toy run
backend.kind = standin
attack.epochs = 50
attack.eta = 0.02
attack.finalize_decode_direct = true
oracle.model = my-model
)");
    CHECK(cfg.get_string("backend.kind", "") == "standin");
    CHECK(cfg.get_int("attack.epochs", 0) == 50);
    CHECK(cfg.get_double("attack.eta", 0.0) == doctest::Approx(0.02));
    CHECK(cfg.get_bool("attack.finalize_decode_direct", false));
    CHECK(cfg.get_string("oracle.model", "") == "my-model");
    // fallbacks for unset keys
    CHECK(cfg.get_int("eval.pairs", 10) == 10);
    CHECK(cfg.has("attack.eta"));
    CHECK(!cfg.has("attack.alpha"));
}

TEST_CASE("unknown keys and malformed lines are rejected") {
    CHECK_THROWS_AS(RunConfig::from_string("attack.warp_speed = 9"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("attack.eta 0.01"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("x").set("nope", "1"), ConfigError);
    RunConfig cfg;
    CHECK_THROWS_AS(cfg.set("typo.key", "v"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_file("/nonexistent/config"), ConfigError);
}

TEST_CASE("type coercion failures are configuration errors") {
    RunConfig cfg = RunConfig::from_string("attack.epochs = soon");
    CHECK_THROWS_AS(cfg.get_int("attack.epochs", 0), ConfigError);
    RunConfig cfg2 = RunConfig::from_string("attack.eta = fast");
    CHECK_THROWS_AS(cfg2.get_double("attack.eta", 0.0), ConfigError);
}

TEST_CASE("hash is stable, order independent and value sensitive") {
    RunConfig a = RunConfig::from_string("attack.eta = 0.01\nattack.epochs = 10");
    RunConfig b = RunConfig::from_string("attack.epochs = 10\nattack.eta = 0.01");
    RunConfig c = RunConfig::from_string("attack.epochs = 11\nattack.eta = 0.01");
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
    CHECK(a.hash().size() == 16);
}

TEST_CASE("builders honor configuration values") {
    RunConfig cfg = RunConfig::from_string(R"(
backend.timesteps = 6
backend.seed = 99
oracle.dim = 16
oracle.threshold = 0.75
region.top = 4
region.bottom = 12
attack.epochs = 25
attack.grad_mode = zeroth_order
attack.zo_samples = 5
loss.lambda_dir = 0
)");
    auto backend = cfg.make_backend();
    CHECK(backend->spec().timesteps == 6);
    CHECK(backend->schedule().T == 6);

    auto oracle = cfg.make_oracle(backend->spec());
    CHECK(oracle->embedding_dim() == 16);

    AttackConfig attack = cfg.make_attack_config();
    CHECK(attack.max_epochs == 25);
    CHECK(attack.threshold == doctest::Approx(0.75));
    CHECK(attack.grad_mode == GradMode::kZerothOrder);
    CHECK(attack.zo_samples == 5);
    CHECK(attack.weights.lambda_dir == 0.0);
    CHECK(attack.weights.lambda_attn == 10000.0);

    PatchRegion region = cfg.make_region(backend->spec());
    auto bb = region.bounding_box();
    CHECK(bb[0] == 4);
    CHECK(bb[2] == 12);

    Renderer renderer = cfg.make_renderer();
    CHECK(renderer.mode() == RenderMode::kPlanar);
    CHECK(RunConfig::from_string("renderer.mode = uv").make_renderer().mode() ==
          RenderMode::kUv);
}

TEST_CASE("defaults build a working component set") {
    RunConfig cfg;
    auto backend = cfg.make_backend();
    CHECK(backend->spec().image_h == 16);
    AttackConfig attack = cfg.make_attack_config();
    CHECK(attack.max_epochs == 200);
    CHECK(attack.eta == doctest::Approx(0.01));
    CHECK(attack.alpha == doctest::Approx(0.5));
    CHECK(attack.invert_steps == 5);
    CHECK(attack.threshold == doctest::Approx(0.8));
    PatchRegion region = cfg.make_region(backend->spec());
    CHECK(!region.is_empty());
}

TEST_CASE("invalid component selections fail loudly") {
    CHECK_THROWS_AS(RunConfig::from_string("backend.kind = pretrained").make_backend(),
                    CapabilityError);
    CHECK_THROWS_AS(RunConfig::from_string("backend.kind = magical").make_backend(), ConfigError);
    RunConfig cfg = RunConfig::from_string("oracle.kind = psychic");
    CHECK_THROWS_AS(cfg.make_oracle(BackendSpec{}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("renderer.mode = holographic").make_renderer(),
                    ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_string("attack.grad_mode = telepathy").make_attack_config(),
        ConfigError);
}
