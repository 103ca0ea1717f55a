#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "patchforge/png_io.hpp"
#include "patchforge/rng.hpp"

using namespace patchforge;

namespace {

std::filesystem::path tmp_png(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("rgb tensor survives an encode decode cycle") {
    Rng rng(3);
    Tensor img({3, 9, 13});
    for (auto& v : img.v) v = rng.uniform01();
    png::Image p = png::from_rgb_tensor(img);
    CHECK(p.width == 13);
    CHECK(p.height == 9);
    CHECK(p.channels == 3);
    CHECK(p.bit_depth == 8);
    png::Image back = png::decode(png::encode(p));
    CHECK(back.samples == p.samples);
    Tensor t = png::to_rgb_tensor(back);
    // 8-bit quantization bound
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(t.v[i] - img.v[i]) <= 0.5 / 255);
}

TEST_CASE("file round trip") {
    Tensor img({3, 4, 4}, 0.5);
    auto path = tmp_png("pf_roundtrip.png");
    png::write_file(path.string(), png::from_rgb_tensor(img));
    png::Image back = png::read_file(path.string());
    CHECK(png::to_rgb_tensor(back).v == png::to_rgb_tensor(png::from_rgb_tensor(img)).v);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(png::read_file(path.string()), Error);
}

TEST_CASE("uv coordinates keep 16-bit precision in gray plus alpha") {
    Rng rng(5);
    Tensor u({6, 7}), v({6, 7});
    for (auto& x : u.v) x = rng.uniform01();
    for (auto& x : v.v) x = rng.uniform01();
    png::Image p = png::from_uv_tensors(u, v);
    CHECK(p.channels == 2);
    CHECK(p.bit_depth == 16);
    png::Image back = png::decode(png::encode(p));
    Tensor u2, v2;
    png::to_uv_tensors(back, u2, v2);
    for (std::size_t i = 0; i < u.size(); ++i) {
        CHECK(std::abs(u2.v[i] - u.v[i]) <= 0.5 / 65535);
        CHECK(std::abs(v2.v[i] - v.v[i]) <= 0.5 / 65535);
    }
}

TEST_CASE("masks round trip through 1-bit grayscale exactly") {
    Rng rng(9);
    Tensor mask({11, 5});
    for (auto& x : mask.v) x = rng.below(2) ? 1.0 : 0.0;
    png::Image p = png::from_mask_tensor(mask);
    CHECK(p.bit_depth == 1);
    CHECK(p.channels == 1);
    Tensor back = png::to_mask_tensor(png::decode(png::encode(p)));
    CHECK(back.v == mask.v);
}

TEST_CASE("decoder rejects corrupt streams") {
    Tensor img({3, 4, 4}, 0.25);
    auto bytes = png::encode(png::from_rgb_tensor(img));
    CHECK_THROWS_AS(png::decode(bytes.data(), 8), Error);
    bytes[bytes.size() / 2] ^= 0xFF;
    CHECK_THROWS_AS(png::decode(bytes), Error);
    std::vector<std::uint8_t> junk(64, 0x42);
    CHECK_THROWS_AS(png::decode(junk), Error);
}
