#pragma once

#include <cstdint>
#include <vector>

#include "tev/common.hpp"

namespace tev {

inline constexpr int kFrameWidth = 160;
inline constexpr int kFrameHeight = 120;

/// Single-channel 8-bit frame, row-major.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    Frame() = default;
    Frame(int w, int h, uint8_t fill = 0) : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }

    bool operator==(const Frame&) const = default;
};

/// Interleaved multi-channel 8-bit image (source material before ingestion).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> data; // row-major, channel-interleaved
};

/// Binary lane template; 1 marks the monitored region.
struct LaneMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> mask; // 0 or 1

    LaneMask() = default;
    LaneMask(int w, int h, uint8_t fill = 1) : width(w), height(h), mask(static_cast<size_t>(w) * h, fill) {}

    uint8_t at(int x, int y) const { return mask[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int x, int y) { return mask[static_cast<size_t>(y) * width + x]; }
};

/// BT.601 luma (0.299 R + 0.587 G + 0.114 B), rounded to nearest.
Frame to_grayscale(const ImageU8& rgb);

/// Center-crop to 4:3, then bilinear resize to 160x120 (pixel-center sampling,
/// edge-clamped).
Frame resize_crop(const Frame& src);

/// 25 fps -> 2 fps: keep source indices round(k * 12.5) while in range.
std::vector<size_t> downsample_indices(size_t frame_count);
std::vector<Frame> temporal_downsample(const std::vector<Frame>& frames);

/// Keep pixels where mask = 1, zero elsewhere.
Frame apply_mask(const Frame& frame, const LaneMask& mask);

} // namespace tev
