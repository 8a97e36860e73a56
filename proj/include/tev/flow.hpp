#pragma once

#include <vector>

#include "tev/clip.hpp"
#include "tev/image.hpp"

namespace tev {

/// Per-pixel motion between two consecutive frames, in pixels/frame.
/// vx is positive for content moving right, vy for content moving down.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<float> vx;
    std::vector<float> vy;

    FlowField() = default;
    FlowField(int w, int h)
        : width(w), height(h), vx(static_cast<size_t>(w) * h, 0.0f), vy(static_cast<size_t>(w) * h, 0.0f) {}
};

struct FlowParams {
    int pyramid_levels = 3;
    double pyramid_scale = 0.5;
    int window_size = 15; // box smoothing of the per-pixel normal equations
    int iterations = 3;
    int poly_n = 5;
    double poly_sigma = 1.1;
};

/// Quadratic-fit coefficients per pixel for f(d) ~ c + b.d + d'Ad over a
/// poly_n window with Gaussian applicability. Layout per pixel:
/// [c, bx, by, axx, ayy, axy] with A = [[axx, axy/2], [axy/2, ayy]].
struct PolyExpansion {
    int width = 0;
    int height = 0;
    std::vector<float> coef; // 6 per pixel

    const float* at(int x, int y) const { return &coef[(static_cast<size_t>(y) * width + x) * 6]; }
};

/// Weighted least-squares quadratic fit around every pixel; intensities are
/// expected in [0,1]. Border pixels use edge-clamped sampling.
PolyExpansion polynomial_expansion(const std::vector<float>& intensities, int width, int height, int poly_n,
                                   double poly_sigma);
PolyExpansion polynomial_expansion(const Frame& frame, int poly_n, double poly_sigma);

/// Coarse-to-fine displacement estimation between two frames.
FlowField estimate_flow(const Frame& prev, const Frame& next, const FlowParams& params = {});

/// Pairwise flow along a clip; entry 0 is a zero field.
std::vector<FlowField> flow_for_clip(const Clip& clip, const FlowParams& params = {});

} // namespace tev
