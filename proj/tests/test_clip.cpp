#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tev/clip.hpp"
#include "tev/image.hpp"
#include "tev/rng.hpp"

using namespace tev;

namespace {

Clip random_clip(uint64_t seed, int frames = 12, int w = 24, int h = 16) {
    Rng rng(seed);
    Clip clip;
    clip.clip_id = "random_" + std::to_string(seed);
    for (int i = 0; i < frames; ++i) {
        Frame f(w, h);
        for (auto& px : f.pixels) px = static_cast<uint8_t>(rng.uniform_int(0, 255));
        clip.frames.push_back(std::move(f));
        LabelSet labels;
        for (auto& b : labels.flags) b = rng.uniform() < 0.3;
        clip.labels.push_back(labels);
    }
    return clip;
}

// Direct evaluation of the interpolation at a single sample point.
double bilinear_oracle(const Frame& f, double x, double y) {
    auto px = [&](int xx, int yy) {
        xx = std::clamp(xx, 0, f.width - 1);
        yy = std::clamp(yy, 0, f.height - 1);
        return static_cast<double>(f.at(xx, yy));
    };
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    return px(x0, y0) * (1 - fx) * (1 - fy) + px(x0 + 1, y0) * fx * (1 - fy) + px(x0, y0 + 1) * (1 - fx) * fy +
           px(x0 + 1, y0 + 1) * fx * fy;
}

} // namespace

TEST_CASE("to_grayscale uses standard luma weights") {
    ImageU8 img{1, 1, 3, {0, 0, 0}};
    CHECK(to_grayscale(img).pixels[0] == 0);
    img.data = {255, 255, 255};
    CHECK(to_grayscale(img).pixels[0] == 255);
    img.data = {100, 50, 200};
    CHECK(to_grayscale(img).pixels[0] == 82); // round(29.9 + 29.35 + 22.8)
}

TEST_CASE("to_grayscale rejects non-3-channel input") {
    ImageU8 img{2, 1, 1, {5, 9}};
    CHECK_THROWS_AS(to_grayscale(img), MalformedInputError);
}

TEST_CASE("resize_crop identity at target size") {
    Rng rng(5);
    Frame f(kFrameWidth, kFrameHeight);
    for (auto& px : f.pixels) px = static_cast<uint8_t>(rng.uniform_int(0, 255));
    CHECK(resize_crop(f) == f);
}

TEST_CASE("resize_crop keeps constant images constant") {
    Frame f(320, 240, 137);
    const Frame out = resize_crop(f);
    REQUIRE(out.width == 160);
    REQUIRE(out.height == 120);
    for (uint8_t px : out.pixels) CHECK(px == 137);
}

TEST_CASE("resize_crop 352x288 matches the bilinear oracle") {
    Rng rng(11);
    Frame f(352, 288);
    for (auto& px : f.pixels) px = static_cast<uint8_t>(rng.uniform_int(0, 255));
    const Frame out = resize_crop(f);

    // 352x288 is taller than 4:3: crop to 352x264 centered (12 rows off each
    // side), then scale by 2.2 in both axes.
    const double sx = 352.0 / 160.0, sy = 264.0 / 120.0;
    for (int y : {0, 7, 63, 119})
        for (int x : {0, 9, 80, 159}) {
            const double src_x = (x + 0.5) * sx - 0.5;
            const double src_y = 12 + (y + 0.5) * sy - 0.5;
            const double expect = bilinear_oracle(f, src_x, src_y);
            CHECK(out.at(x, y) == static_cast<uint8_t>(std::clamp(std::lround(expect), 0L, 255L)));
        }
}

TEST_CASE("resize_crop rejects degenerate sources") {
    CHECK_THROWS_AS(resize_crop(Frame(1, 100)), MalformedInputError);
    CHECK_THROWS_AS(resize_crop(Frame(100, 1)), MalformedInputError);
}

TEST_CASE("temporal downsample keeps round(12.5 k)") {
    CHECK(downsample_indices(25) == std::vector<size_t>{0, 13});
    CHECK(downsample_indices(1) == std::vector<size_t>{0});
    CHECK(downsample_indices(250).size() == 20);
    CHECK(downsample_indices(0).empty());
}

TEST_CASE("temporal downsample length matches the counting rule") {
    for (size_t n : {size_t{1}, size_t{7}, size_t{13}, size_t{26}, size_t{100}, size_t{125}, size_t{333}}) {
        size_t expected = 0;
        for (size_t k = 0;; ++k) {
            if (static_cast<size_t>(std::llround(k * 12.5)) >= n) break;
            ++expected;
        }
        CHECK(downsample_indices(n).size() == expected);
    }
}

TEST_CASE("apply_mask keeps lane pixels and zeroes the rest") {
    Frame f(8, 4, 200);
    LaneMask ones(8, 4, 1);
    CHECK(apply_mask(f, ones) == f);

    LaneMask zeros(8, 4, 0);
    const Frame black = apply_mask(f, zeros);
    for (uint8_t px : black.pixels) CHECK(px == 0);

    LaneMask half(8, 4, 0);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) half.at(x, y) = 1;
    const Frame out = apply_mask(f, half);
    CHECK(out.at(0, 0) == 200);
    CHECK(out.at(3, 3) == 200);
    CHECK(out.at(4, 0) == 0);
    CHECK(out.at(7, 3) == 0);
}

TEST_CASE("apply_mask is idempotent") {
    Rng rng(3);
    Frame f(16, 8);
    for (auto& px : f.pixels) px = static_cast<uint8_t>(rng.uniform_int(0, 255));
    LaneMask mask(16, 8, 0);
    for (auto& m : mask.mask) m = rng.uniform() < 0.5 ? 1 : 0;
    const Frame once = apply_mask(f, mask);
    CHECK(apply_mask(once, mask) == once);
}

TEST_CASE("apply_mask rejects dimension mismatch") {
    CHECK_THROWS_AS(apply_mask(Frame(8, 4), LaneMask(4, 8)), MalformedInputError);
}

TEST_CASE("clip container round-trips bit-exactly") {
    for (uint64_t seed = 1; seed <= 8; ++seed) {
        const Clip clip = random_clip(seed);
        const auto bytes = serialize_clip(clip);
        const Clip back = deserialize_clip(bytes, clip.clip_id);
        CHECK(back.frames == clip.frames);
        CHECK(back.labels == clip.labels);
        CHECK(back.frame_rate == clip.frame_rate);
    }
}

TEST_CASE("clip container round-trips through the filesystem") {
    const auto dir = std::filesystem::temp_directory_path() / "tev_clip_test";
    std::filesystem::create_directories(dir);
    const Clip clip = random_clip(99, 125, 160, 120);
    const auto path = dir / "clip.tevc";
    save_clip(clip, path);
    const Clip back = load_clip(path);
    CHECK(back.frames == clip.frames);
    CHECK(back.labels == clip.labels);
    std::filesystem::remove_all(dir);
}

TEST_CASE("container errors name the problem") {
    const Clip clip = random_clip(42, 3);
    auto bytes = serialize_clip(clip);

    SUBCASE("bad magic") {
        bytes[0] = 'X';
        CHECK_THROWS_WITH_AS(deserialize_clip(bytes, "x"), doctest::Contains("bad magic"), FormatError);
    }
    SUBCASE("version mismatch") {
        bytes[4] = 9;
        CHECK_THROWS_WITH_AS(deserialize_clip(bytes, "x"), doctest::Contains("version mismatch"), FormatError);
    }
    SUBCASE("truncation") {
        bytes.resize(bytes.size() - 10);
        CHECK_THROWS_WITH_AS(deserialize_clip(bytes, "x"), doctest::Contains("truncated"), FormatError);
    }
    SUBCASE("frame count larger than payload") {
        bytes[13] = 125; // frame_count low byte
        CHECK_THROWS_WITH_AS(deserialize_clip(bytes, "x"), doctest::Contains("truncated"), FormatError);
    }
    SUBCASE("label bitmask with high bits") {
        bytes[17] = 0x1f; // first frame label byte
        CHECK_THROWS_WITH_AS(deserialize_clip(bytes, "x"), doctest::Contains("bits >= 4"), FormatError);
    }
}

TEST_CASE("clip metadata sidecar round-trips") {
    const auto dir = std::filesystem::temp_directory_path() / "tev_meta_test";
    std::filesystem::create_directories(dir);
    ClipMeta meta{"clip_7", 1234567, 42, "wrong_way"};
    save_clip_meta(meta, dir / "clip_7.json");
    const auto back = load_clip_meta(dir / "clip_7.json");
    REQUIRE(back.has_value());
    CHECK(back->clip_id == "clip_7");
    CHECK(back->seed == 1234567);
    CHECK(back->event_onset_frame == 42);
    CHECK(back->scenario_kind == "wrong_way");
    CHECK(!load_clip_meta(dir / "missing.json").has_value());
    std::filesystem::remove_all(dir);
}
