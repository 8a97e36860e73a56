#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ref/reference.hpp"
#include "tev/features.hpp"
#include "tev/rng.hpp"

using namespace tev;

namespace {

FlowField random_flow(uint64_t seed, int w = kFrameWidth, int h = kFrameHeight, double span = 12.0) {
    Rng rng(seed);
    FlowField f(w, h);
    for (size_t i = 0; i < f.vx.size(); ++i) {
        f.vx[i] = static_cast<float>(rng.uniform(-span, span));
        f.vy[i] = static_cast<float>(rng.uniform(-span, span));
    }
    return f;
}

} // namespace

TEST_CASE("quantizer handles the documented cases") {
    QuantizerConfig q;
    CHECK(!quantize_vector(0.0, 0.0, q).has_value());
    CHECK(!quantize_vector(0.3, 0.3, q).has_value()); // magnitude 0.42 < 0.5

    auto bin = quantize_vector(1.0, 0.0, q);
    REQUIRE(bin.has_value());
    CHECK(*bin == 0); // theta 0 -> dir 0; magnitude 1 in [0.5,2) -> level 0

    bin = quantize_vector(-4.0, -4.0, q);
    REQUIRE(bin.has_value());
    CHECK(*bin == 21); // theta 5pi/4 -> dir 5; magnitude 5.657 in [5,10) -> level 2
}

TEST_CASE("quantizer level edges are inclusive on the lower bound") {
    QuantizerConfig q;
    CHECK(*quantize_vector(0.5, 0.0, q) == 0);
    CHECK(*quantize_vector(2.0, 0.0, q) == 8);
    CHECK(*quantize_vector(5.0, 0.0, q) == 16);
    CHECK(*quantize_vector(10.0, 0.0, q) == 24);
    CHECK(*quantize_vector(1000.0, 0.0, q) == 24); // top level unbounded
}

TEST_CASE("quantizer direction bins are 45-degree sectors from angle 0") {
    QuantizerConfig q;
    for (int d = 0; d < 8; ++d) {
        const double theta = (d + 0.5) * std::numbers::pi / 4.0;
        const auto bin = quantize_vector(std::cos(theta), std::sin(theta), q);
        REQUIRE(bin.has_value());
        CHECK(*bin % 8 == d);
    }
}

TEST_CASE("quantizer rejects bad thresholds") {
    QuantizerConfig q;
    q.level_thresholds = {1.0, 1.0, 2.0, 3.0};
    CHECK_THROWS_AS(q.validate(), ConfigError);
    q.level_thresholds = {-1.0, 1.0, 2.0, 3.0};
    CHECK_THROWS_AS(q.validate(), ConfigError);
}

TEST_CASE("zero flow gives all-zero histograms") {
    FlowField flow(kFrameWidth, kFrameHeight);
    QuantizerConfig q;
    for (float v : stripe_histograms(flow, q)) CHECK(v == 0.0f);
}

TEST_CASE("uniform flow fills bin 0 of every stripe") {
    FlowField flow(kFrameWidth, kFrameHeight);
    for (auto& v : flow.vx) v = 1.0f;
    QuantizerConfig q;
    const auto hist = stripe_histograms(flow, q);
    for (int s = 0; s < kStripes; ++s)
        for (int b = 0; b < kHistBins; ++b)
            CHECK(hist[static_cast<size_t>(s) * kHistBins + b] == (b == 0 ? 1.0f : 0.0f));
}

TEST_CASE("stripe histograms equal the brute-force oracle exactly") {
    QuantizerConfig q;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const FlowField flow = random_flow(seed);
        const auto fast = stripe_histograms(flow, q);
        const auto slow = ref::serial_stripe_histograms(flow, q.level_thresholds);
        REQUIRE(fast == slow);
    }
}

TEST_CASE("histogram mass equals the moving-pixel fraction") {
    QuantizerConfig q;
    const FlowField flow = random_flow(123);
    const auto hist = stripe_histograms(flow, q);
    const int stripe_rows = flow.height / kStripes;
    for (int s = 0; s < kStripes; ++s) {
        double mass = 0.0;
        for (int b = 0; b < kHistBins; ++b) mass += hist[static_cast<size_t>(s) * kHistBins + b];
        int moving = 0;
        for (int y = s * stripe_rows; y < (s + 1) * stripe_rows; ++y)
            for (int x = 0; x < flow.width; ++x) {
                const size_t i = static_cast<size_t>(y) * flow.width + x;
                if (std::sqrt(static_cast<double>(flow.vx[i]) * flow.vx[i] +
                              static_cast<double>(flow.vy[i]) * flow.vy[i]) >= q.null_motion_epsilon())
                    ++moving;
            }
        CHECK(mass == doctest::Approx(moving / 4800.0).epsilon(1e-6)); // bins stored as f32
    }
}

TEST_CASE("rotating all vectors by 45 degrees permutes direction bins") {
    QuantizerConfig q;
    const FlowField flow = random_flow(9);
    FlowField rotated(flow.width, flow.height);
    const double c = std::cos(std::numbers::pi / 4.0), s = std::sin(std::numbers::pi / 4.0);
    for (size_t i = 0; i < flow.vx.size(); ++i) {
        rotated.vx[i] = static_cast<float>(c * flow.vx[i] - s * flow.vy[i]);
        rotated.vy[i] = static_cast<float>(s * flow.vx[i] + c * flow.vy[i]);
    }
    // Rotation preserves magnitudes only approximately in float; quantize
    // per pixel and compare bin-by-bin where the level did not change.
    size_t checked = 0;
    for (size_t i = 0; i < flow.vx.size(); ++i) {
        const auto a = quantize_vector(flow.vx[i], flow.vy[i], q);
        const auto b = quantize_vector(rotated.vx[i], rotated.vy[i], q);
        if (!a.has_value()) continue;
        REQUIRE(b.has_value());
        if (*a / 8 == *b / 8) { // same level
            CHECK(*b % 8 == (*a % 8 + 1) % 8);
            ++checked;
        }
    }
    CHECK(checked > flow.vx.size() * 9 / 10);
}

TEST_CASE("histogram is invariant to within-level magnitude scaling") {
    QuantizerConfig q;
    FlowField flow(kFrameWidth, kFrameHeight);
    Rng rng(77);
    for (size_t i = 0; i < flow.vx.size(); ++i) {
        // magnitudes near the middle of level 1 ([2,5)): 2.6..3.8
        const double mag = rng.uniform(2.6, 3.8);
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        flow.vx[i] = static_cast<float>(mag * std::cos(theta));
        flow.vy[i] = static_cast<float>(mag * std::sin(theta));
    }
    const auto base = stripe_histograms(flow, q);
    FlowField scaled = flow;
    for (size_t i = 0; i < flow.vx.size(); ++i) {
        scaled.vx[i] *= 1.2f;
        scaled.vy[i] *= 1.2f; // magnitudes 3.1..4.6, still inside level 1
    }
    CHECK(stripe_histograms(scaled, q) == base);
}

TEST_CASE("stationary counts find foreground pixels with null motion") {
    QuantizerConfig q;
    FlowField flow(kFrameWidth, kFrameHeight);
    ForegroundMask fg(kFrameWidth, kFrameHeight);

    SUBCASE("empty mask") {
        for (float v : stationary_counts(fg, flow, q)) CHECK(v == 0.0f);
    }
    SUBCASE("ten still pixels in stripe 2") {
        for (int i = 0; i < 10; ++i) fg.fg[static_cast<size_t>(65) * kFrameWidth + 20 + i] = 1;
        const auto counts = stationary_counts(fg, flow, q);
        CHECK(counts[0] == 0.0f);
        CHECK(counts[1] == 0.0f);
        CHECK(counts[2] == doctest::Approx(10.0 / 4800.0));
        CHECK(counts[3] == 0.0f);
    }
    SUBCASE("moving foreground does not count") {
        for (auto& v : flow.vx) v = 3.0f;
        for (auto& v : fg.fg) v = 1;
        for (float v : stationary_counts(fg, flow, q)) CHECK(v == 0.0f);
    }
}

TEST_CASE("stationary counts reject mismatched dimensions") {
    QuantizerConfig q;
    CHECK_THROWS_AS(stationary_counts(ForegroundMask(8, 8), FlowField(8, 4), q), MalformedInputError);
}

TEST_CASE("motion feature vector layout is stripe-major with trailing counts") {
    QuantizerConfig q;
    FlowField flow(kFrameWidth, kFrameHeight);
    ForegroundMask fg(kFrameWidth, kFrameHeight);

    SUBCASE("all zero") {
        for (auto& v : flow.vx) v = 0.0f;
        const auto vec = motion_feature_vector(flow, fg, q);
        for (float v : vec) CHECK(v == 0.0f);
        CHECK(vec.size() == 132);
    }
    SUBCASE("uniform flow lights up entries 0,33,66,99") {
        for (auto& v : flow.vx) v = 1.0f;
        const auto vec = motion_feature_vector(flow, fg, q);
        for (size_t i = 0; i < vec.size(); ++i) {
            if (i == 0 || i == 33 || i == 66 || i == 99)
                CHECK(vec[i] == 1.0f);
            else
                CHECK(vec[i] == 0.0f);
        }
    }
    SUBCASE("stationary count lands at index 32 of its stripe") {
        fg.fg[static_cast<size_t>(10) * kFrameWidth + 5] = 1; // stripe 0, still
        const auto vec = motion_feature_vector(flow, fg, q);
        CHECK(vec[32] == doctest::Approx(1.0 / 4800.0));
        CHECK(vec[65] == 0.0f);
    }
}

TEST_CASE("appearance tensor scales gray to [0,1]") {
    Frame f(kFrameWidth, kFrameHeight, 0);
    f.at(0, 0) = 255;
    f.at(1, 0) = 128;
    const auto t = build_appearance(f);
    CHECK(t.size() == static_cast<size_t>(kFrameWidth) * kFrameHeight);
    CHECK(t[0] == 1.0f);
    CHECK(t[1] == doctest::Approx(128.0 / 255.0));
    CHECK(t[2] == 0.0f);
}

TEST_CASE("appearance+flow tensor clamps and scales the motion channels") {
    Frame f(kFrameWidth, kFrameHeight, 0);
    f.at(0, 0) = 255;
    FlowField flow(kFrameWidth, kFrameHeight);
    flow.vx[0] = 8.0f;
    flow.vy[0] = -8.0f;
    flow.vx[1] = 20.0f; // clamps to 8
    const auto t = build_appearance_flow(f, flow);
    CHECK(t.size() == static_cast<size_t>(kFrameWidth) * kFrameHeight * 3);
    CHECK(t[0] == 1.0f);
    CHECK(t[1] == 1.0f);
    CHECK(t[2] == -1.0f);
    CHECK(t[3] == 0.0f);
    CHECK(t[4] == 1.0f);
    for (float v : t) {
        CHECK(v >= -1.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("appearance+flow rejects mismatched dimensions") {
    CHECK_THROWS_AS(build_appearance_flow(Frame(8, 8), FlowField(8, 4)), MalformedInputError);
}
