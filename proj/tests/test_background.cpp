#include <doctest.h>

#include <cmath>

#include "ref/reference.hpp"
#include "tev/background.hpp"
#include "tev/rng.hpp"

using namespace tev;

namespace {

Frame noisy_scene(uint64_t seed, double sigma = 2.0) {
    Rng rng(seed);
    Frame f(64, 48);
    for (size_t i = 0; i < f.pixels.size(); ++i) {
        const double base = 90.0 + 30.0 * std::sin(static_cast<double>(i) * 0.01);
        f.pixels[i] = static_cast<uint8_t>(std::clamp(std::lround(base + sigma * rng.normal()), 0L, 255L));
    }
    return f;
}

void paint_rect(Frame& f, int x0, int y0, int w, int h, uint8_t value) {
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) f.at(x, y) = value;
}

double rect_fg_fraction(const ForegroundMask& mask, int x0, int y0, int w, int h) {
    int count = 0;
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) count += mask.fg[static_cast<size_t>(y) * mask.width + x];
    return static_cast<double>(count) / (w * h);
}

} // namespace

TEST_CASE("bg_init seeds one component per pixel") {
    Frame f(8, 4, 100);
    f.at(3, 2) = 55;
    const BackgroundState state = bg_init(f);
    const MixtureComponent* c = state.pixel(0, 0);
    CHECK(c[0].mean == 100.0f);
    CHECK(c[0].variance == 225.0f);
    CHECK(c[0].weight == 1.0f);
    CHECK(c[1].weight == 0.0f);
    CHECK(state.pixel(3, 2)[0].mean == 55.0f);
}

TEST_CASE("invalid parameters are rejected at construction") {
    Frame f(4, 4, 0);
    BgParams params;
    params.learning_rate = 0.0;
    CHECK_THROWS_AS(bg_init(f, params), ConfigError);
    params = BgParams{};
    params.background_ratio = 1.5;
    CHECK_THROWS_AS(bg_init(f, params), ConfigError);
    params = BgParams{};
    params.match_threshold = -1.0;
    CHECK_THROWS_AS(bg_init(f, params), ConfigError);
}

TEST_CASE("match rule: value within lambda sigma is background") {
    // single component (mu=100, sigma=5 -> var=25), lambda=2.5: |105-100| < 12.5
    Frame f(1, 1, 100);
    BgParams params;
    params.variance_floor = 25.0;
    params.initial_variance = 25.0;
    BackgroundState state = bg_init(f, params);
    Frame probe(1, 1, 105);
    const ForegroundMask mask = state.update(probe);
    CHECK(mask.fg[0] == 0);

    Frame far_probe(1, 1, 140); // |140-100| = 40 > 12.5
    BackgroundState state2 = bg_init(f, params);
    CHECK(state2.update(far_probe).fg[0] == 1);
}

TEST_CASE("static scene converges below 0.5% foreground by frame 50") {
    const Frame scene = noisy_scene(1, 0.0);
    BackgroundState state = bg_init(scene);
    ForegroundMask mask;
    for (int t = 0; t < 50; ++t) mask = state.update(scene);
    CHECK(mask.foreground_fraction() < 0.005);
}

TEST_CASE("static scene with per-frame noise still converges") {
    BackgroundState state = bg_init(noisy_scene(100, 2.0));
    double frac = 1.0;
    for (int t = 0; t < 50; ++t) frac = state.update(noisy_scene(200 + t, 2.0)).foreground_fraction();
    CHECK(frac < 0.005);
}

TEST_CASE("a parked rectangle stays foreground for a long time") {
    const Frame scene = noisy_scene(7, 0.0);
    BackgroundState state = bg_init(scene);
    for (int t = 0; t < 10; ++t) state.update(scene);

    Frame with_rect = scene;
    paint_rect(with_rect, 20, 10, 16, 10, 230);
    ForegroundMask mask;
    for (int t = 0; t < 5; ++t) mask = state.update(with_rect);
    CHECK(rect_fg_fraction(mask, 20, 10, 16, 10) >= 0.90);

    for (int t = 0; t < 55; ++t) mask = state.update(with_rect);
    CHECK(rect_fg_fraction(mask, 20, 10, 16, 10) >= 0.70); // 60 frames after appearing
    // and the rest of the scene is background
    CHECK(mask.foreground_fraction() <= (16.0 * 10.0) / (64.0 * 48.0) + 0.005);
}

TEST_CASE("weights stay normalized and variances floored") {
    Rng rng(3);
    Frame frame(16, 12);
    BgParams params;
    BackgroundState state = bg_init(noisy_scene(5), params);
    for (int t = 0; t < 30; ++t) {
        Frame f(64, 48);
        for (auto& px : f.pixels) px = static_cast<uint8_t>(rng.uniform_int(0, 255));
        state.update(f);
    }
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 64; ++x) {
            const MixtureComponent* c = state.pixel(x, y);
            float total = 0.0f;
            float prev_weight = 1.1f;
            for (int k = 0; k < params.components; ++k) {
                CHECK(c[k].weight >= 0.0f);
                CHECK(c[k].weight <= 1.0f);
                CHECK(c[k].weight <= prev_weight); // sorted descending
                prev_weight = c[k].weight;
                total += c[k].weight;
                if (c[k].weight > 0.0f) CHECK(c[k].variance >= static_cast<float>(params.variance_floor));
            }
            CHECK(total == doctest::Approx(1.0f).epsilon(1e-4));
        }
}

TEST_CASE("update rejects mismatched frames") {
    BackgroundState state = bg_init(Frame(8, 8, 10));
    Frame wrong(8, 4, 10);
    CHECK_THROWS_AS(state.update(wrong), MalformedInputError);
}

TEST_CASE("parallel update matches the serial reference") {
    BgParams params;
    BackgroundState fast = bg_init(noisy_scene(11, 0.0), params);
    ref::SerialBackground slow(noisy_scene(11, 0.0), params);
    for (int t = 0; t < 20; ++t) {
        Frame f = noisy_scene(11, 0.0);
        if (t > 5) paint_rect(f, 5, 5, 10, 8, 240);
        const ForegroundMask a = fast.update(f);
        const ForegroundMask b = slow.update(f);
        REQUIRE(a.fg == b.fg);
    }
}

TEST_CASE("mask sequence is deterministic") {
    auto run = [] {
        BackgroundState state = bg_init(noisy_scene(42, 0.0));
        std::vector<ForegroundMask> masks;
        for (int t = 0; t < 10; ++t) {
            Frame f = noisy_scene(42 + t, 1.5);
            masks.push_back(state.update(f));
        }
        return masks;
    };
    const auto a = run();
    const auto b = run();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].fg == b[i].fg);
}
