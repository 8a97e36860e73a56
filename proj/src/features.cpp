#include "tev/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tev/common.hpp"

namespace tev {

void QuantizerConfig::validate() const {
    double prev = 0.0;
    for (double t : level_thresholds) {
        if (t <= prev) throw ConfigError("quantizer thresholds must be strictly ascending and positive");
        prev = t;
    }
}

std::optional<int> quantize_vector(double vx, double vy, const QuantizerConfig& q) {
    const double magnitude = std::sqrt(vx * vx + vy * vy);
    if (magnitude < q.level_thresholds[0]) return std::nullopt;

    double theta = std::atan2(vy, vx);
    if (theta < 0.0) theta += 2.0 * std::numbers::pi;
    int direction = static_cast<int>(theta / (std::numbers::pi / 4.0));
    if (direction >= kHistDirections) direction = kHistDirections - 1;

    int level = 0;
    for (int i = kHistLevels - 1; i >= 1; --i)
        if (magnitude >= q.level_thresholds[i]) { level = i; break; }
    return level * kHistDirections + direction;
}

namespace {

void check_stripe_dims(int width, int height) {
    if (height % kStripes != 0 || height == 0 || width == 0)
        throw MalformedInputError("stripe features need a height divisible by 4, got " + std::to_string(width) +
                                  "x" + std::to_string(height));
}

} // namespace

std::array<float, kStripes * kHistBins> stripe_histograms(const FlowField& flow, const QuantizerConfig& q) {
    check_stripe_dims(flow.width, flow.height);
    const int stripe_rows = flow.height / kStripes;
    const double stripe_area = static_cast<double>(stripe_rows) * flow.width;

    std::array<float, kStripes * kHistBins> out{};
#pragma omp parallel for schedule(static)
    for (int s = 0; s < kStripes; ++s) {
        int counts[kHistBins] = {};
        for (int y = s * stripe_rows; y < (s + 1) * stripe_rows; ++y)
            for (int x = 0; x < flow.width; ++x) {
                const size_t i = static_cast<size_t>(y) * flow.width + x;
                if (auto bin = quantize_vector(flow.vx[i], flow.vy[i], q)) ++counts[*bin];
            }
        for (int b = 0; b < kHistBins; ++b)
            out[static_cast<size_t>(s) * kHistBins + b] = static_cast<float>(counts[b] / stripe_area);
    }
    return out;
}

std::array<float, kStripes> stationary_counts(const ForegroundMask& fg, const FlowField& flow,
                                              const QuantizerConfig& q) {
    if (fg.width != flow.width || fg.height != flow.height)
        throw MalformedInputError("stationary_counts: mask " + std::to_string(fg.width) + "x" +
                                  std::to_string(fg.height) + " vs flow " + std::to_string(flow.width) + "x" +
                                  std::to_string(flow.height));
    check_stripe_dims(flow.width, flow.height);
    const int stripe_rows = flow.height / kStripes;
    const double stripe_area = static_cast<double>(stripe_rows) * flow.width;
    const double eps = q.null_motion_epsilon();

    std::array<float, kStripes> out{};
    for (int s = 0; s < kStripes; ++s) {
        int count = 0;
        for (int y = s * stripe_rows; y < (s + 1) * stripe_rows; ++y)
            for (int x = 0; x < flow.width; ++x) {
                const size_t i = static_cast<size_t>(y) * flow.width + x;
                if (!fg.fg[i]) continue;
                const double m = std::sqrt(static_cast<double>(flow.vx[i]) * flow.vx[i] +
                                           static_cast<double>(flow.vy[i]) * flow.vy[i]);
                if (m < eps) ++count;
            }
        out[s] = static_cast<float>(count / stripe_area);
    }
    return out;
}

std::array<float, kMotionFeatureDim> motion_feature_vector(const FlowField& flow, const ForegroundMask& fg,
                                                           const QuantizerConfig& q) {
    const auto hist = stripe_histograms(flow, q);
    const auto counts = stationary_counts(fg, flow, q);
    std::array<float, kMotionFeatureDim> out{};
    for (int s = 0; s < kStripes; ++s) {
        for (int b = 0; b < kHistBins; ++b)
            out[static_cast<size_t>(s) * kStripeFeatureDim + b] = hist[static_cast<size_t>(s) * kHistBins + b];
        out[static_cast<size_t>(s) * kStripeFeatureDim + kHistBins] = counts[s];
    }
    return out;
}

std::vector<float> build_appearance(const Frame& frame) {
    std::vector<float> out(frame.pixels.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = frame.pixels[i] * (1.0f / 255.0f);
    return out;
}

std::vector<float> build_appearance_flow(const Frame& frame, const FlowField& flow) {
    if (frame.width != flow.width || frame.height != flow.height)
        throw MalformedInputError("build_appearance_flow: frame " + std::to_string(frame.width) + "x" +
                                  std::to_string(frame.height) + " vs flow " + std::to_string(flow.width) + "x" +
                                  std::to_string(flow.height));
    std::vector<float> out(frame.pixels.size() * 3);
    for (size_t i = 0; i < frame.pixels.size(); ++i) {
        out[i * 3 + 0] = frame.pixels[i] * (1.0f / 255.0f);
        out[i * 3 + 1] = std::clamp(flow.vx[i], -8.0f, 8.0f) / 8.0f;
        out[i * 3 + 2] = std::clamp(flow.vy[i], -8.0f, 8.0f) / 8.0f;
    }
    return out;
}

} // namespace tev
