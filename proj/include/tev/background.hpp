#pragma once

#include <vector>

#include "tev/image.hpp"

namespace tev {

struct BgParams {
    int components = 3;            // K
    double learning_rate = 0.002;  // alpha; deliberately slow so stalled
                                   // vehicles stay foreground for a full clip
    double match_threshold = 2.5;  // lambda, in standard deviations
    double background_ratio = 0.7; // T
    double initial_variance = 225.0;
    double variance_floor = 16.0;
};

/// Per-pixel Gaussian component.
struct MixtureComponent {
    float mean = 0.0f;
    float variance = 0.0f;
    float weight = 0.0f;
};

struct ForegroundMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> fg; // 1 = foreground

    ForegroundMask() = default;
    ForegroundMask(int w, int h) : width(w), height(h), fg(static_cast<size_t>(w) * h, 0) {}

    double foreground_fraction() const;
};

/// Adaptive per-pixel mixture; components kept sorted by descending weight.
class BackgroundState {
public:
    BackgroundState(const Frame& first_frame, const BgParams& params = {});

    /// Advance the model with one frame and return its foreground mask.
    ForegroundMask update(const Frame& frame);

    int width() const { return width_; }
    int height() const { return height_; }
    const BgParams& params() const { return params_; }
    const MixtureComponent* pixel(int x, int y) const {
        return &mixtures_[(static_cast<size_t>(y) * width_ + x) * params_.components];
    }

private:
    int width_ = 0;
    int height_ = 0;
    BgParams params_;
    std::vector<MixtureComponent> mixtures_; // K per pixel
};

BackgroundState bg_init(const Frame& first_frame, const BgParams& params = {});
ForegroundMask bg_update(BackgroundState& state, const Frame& frame);

} // namespace tev
