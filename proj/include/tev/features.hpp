#pragma once

#include <array>
#include <optional>
#include <vector>

#include "tev/background.hpp"
#include "tev/flow.hpp"

namespace tev {

inline constexpr int kHistDirections = 8;
inline constexpr int kHistLevels = 4;
inline constexpr int kHistBins = kHistDirections * kHistLevels; // 32
inline constexpr int kStripes = 4;
inline constexpr int kStripeFeatureDim = kHistBins + 1;                 // 33
inline constexpr int kMotionFeatureDim = kStripes * kStripeFeatureDim; // 132

/// Direction/magnitude quantization: 8 direction bins of 45 degrees starting
/// at angle 0, 4 magnitude levels with ascending thresholds; the lowest
/// threshold doubles as the null-motion cutoff.
struct QuantizerConfig {
    std::array<double, kHistLevels> level_thresholds{0.5, 2.0, 5.0, 10.0}; // px/frame

    double null_motion_epsilon() const { return level_thresholds[0]; }
    void validate() const;
};

/// Bin index in [0,32) for a moving pixel, nullopt for null motion.
std::optional<int> quantize_vector(double vx, double vy, const QuantizerConfig& q);

/// Four stripe histograms (stripe-major), each normalized by stripe area.
std::array<float, kStripes * kHistBins> stripe_histograms(const FlowField& flow, const QuantizerConfig& q);

/// Per-stripe fraction of foreground pixels with null motion.
std::array<float, kStripes> stationary_counts(const ForegroundMask& fg, const FlowField& flow,
                                              const QuantizerConfig& q);

/// The 132-entry frame representation: per stripe, 32 bins then the
/// stationary count.
std::array<float, kMotionFeatureDim> motion_feature_vector(const FlowField& flow, const ForegroundMask& fg,
                                                           const QuantizerConfig& q);

/// HxWx1 grayscale in [0,1], row-major (y, x, channel).
std::vector<float> build_appearance(const Frame& frame);

/// HxWx3: gray in [0,1]; flow components clamped to [-8,8] then divided by 8.
std::vector<float> build_appearance_flow(const Frame& frame, const FlowField& flow);

} // namespace tev
