#include "tev/image.hpp"

#include <algorithm>
#include <cmath>

namespace tev {

Frame to_grayscale(const ImageU8& rgb) {
    if (rgb.channels != 3)
        throw MalformedInputError("to_grayscale: expected 3 channels, got " + std::to_string(rgb.channels));
    Frame out(rgb.width, rgb.height);
    const size_t n = static_cast<size_t>(rgb.width) * rgb.height;
    for (size_t i = 0; i < n; ++i) {
        const double r = rgb.data[i * 3 + 0];
        const double g = rgb.data[i * 3 + 1];
        const double b = rgb.data[i * 3 + 2];
        out.pixels[i] = static_cast<uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
    }
    return out;
}

namespace {

double bilinear_at(const Frame& f, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto clamped = [&](int xx, int yy) {
        xx = std::clamp(xx, 0, f.width - 1);
        yy = std::clamp(yy, 0, f.height - 1);
        return static_cast<double>(f.at(xx, yy));
    };
    const double top = clamped(x0, y0) * (1.0 - fx) + clamped(x0 + 1, y0) * fx;
    const double bot = clamped(x0, y0 + 1) * (1.0 - fx) + clamped(x0 + 1, y0 + 1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

} // namespace

Frame resize_crop(const Frame& src) {
    if (src.width < 2 || src.height < 2)
        throw MalformedInputError("resize_crop: degenerate source " + std::to_string(src.width) + "x" +
                                  std::to_string(src.height));

    // Crop the longer side down to a 4:3 window, centered.
    int crop_w = src.width;
    int crop_h = src.height;
    if (src.width * 3 >= src.height * 4)
        crop_w = src.height * 4 / 3;
    else
        crop_h = src.width * 3 / 4;
    const int x_off = (src.width - crop_w) / 2;
    const int y_off = (src.height - crop_h) / 2;

    Frame out(kFrameWidth, kFrameHeight);
    const double sx = static_cast<double>(crop_w) / kFrameWidth;
    const double sy = static_cast<double>(crop_h) / kFrameHeight;
    for (int y = 0; y < kFrameHeight; ++y) {
        const double src_y = y_off + (y + 0.5) * sy - 0.5;
        for (int x = 0; x < kFrameWidth; ++x) {
            const double src_x = x_off + (x + 0.5) * sx - 0.5;
            const double v = bilinear_at(src, src_x, src_y);
            out.at(x, y) = static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return out;
}

std::vector<size_t> downsample_indices(size_t frame_count) {
    std::vector<size_t> kept;
    for (size_t k = 0;; ++k) {
        const size_t idx = static_cast<size_t>(std::llround(static_cast<double>(k) * 12.5));
        if (idx >= frame_count) break;
        kept.push_back(idx);
    }
    return kept;
}

std::vector<Frame> temporal_downsample(const std::vector<Frame>& frames) {
    std::vector<Frame> out;
    for (size_t idx : downsample_indices(frames.size())) out.push_back(frames[idx]);
    return out;
}

Frame apply_mask(const Frame& frame, const LaneMask& mask) {
    if (frame.width != mask.width || frame.height != mask.height)
        throw MalformedInputError("apply_mask: frame " + std::to_string(frame.width) + "x" +
                                  std::to_string(frame.height) + " vs mask " + std::to_string(mask.width) + "x" +
                                  std::to_string(mask.height));
    Frame out = frame;
    for (size_t i = 0; i < out.pixels.size(); ++i)
        if (!mask.mask[i]) out.pixels[i] = 0;
    return out;
}

} // namespace tev
