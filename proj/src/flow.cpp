#include "tev/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace tev {

namespace {

// Gauss-Jordan inverse for the tiny basis Gram matrix.
std::array<double, 36> invert6(std::array<double, 36> m) {
    std::array<double, 36> inv{};
    for (int i = 0; i < 6; ++i) inv[i * 6 + i] = 1.0;
    for (int col = 0; col < 6; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 6; ++r)
            if (std::abs(m[r * 6 + col]) > std::abs(m[pivot * 6 + col])) pivot = r;
        for (int c = 0; c < 6; ++c) {
            std::swap(m[col * 6 + c], m[pivot * 6 + c]);
            std::swap(inv[col * 6 + c], inv[pivot * 6 + c]);
        }
        const double diag = m[col * 6 + col];
        for (int c = 0; c < 6; ++c) {
            m[col * 6 + c] /= diag;
            inv[col * 6 + c] /= diag;
        }
        for (int r = 0; r < 6; ++r) {
            if (r == col) continue;
            const double f = m[r * 6 + col];
            if (f == 0.0) continue;
            for (int c = 0; c < 6; ++c) {
                m[r * 6 + c] -= f * m[col * 6 + c];
                inv[r * 6 + c] -= f * inv[col * 6 + c];
            }
        }
    }
    return inv;
}

std::vector<float> frame_to_unit(const Frame& f) {
    std::vector<float> v(f.pixels.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = f.pixels[i] * (1.0f / 255.0f);
    return v;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Separable 5-tap binomial blur with edge clamp, then bilinear resize.
std::vector<float> smooth_and_resize(const std::vector<float>& src, int sw, int sh, int dw, int dh) {
    static const float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
    std::vector<float> tmp(src.size()), blurred(src.size());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < sh; ++y)
        for (int x = 0; x < sw; ++x) {
            float acc = 0.f;
            for (int t = -2; t <= 2; ++t) acc += k[t + 2] * src[static_cast<size_t>(y) * sw + clampi(x + t, 0, sw - 1)];
            tmp[static_cast<size_t>(y) * sw + x] = acc;
        }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < sh; ++y)
        for (int x = 0; x < sw; ++x) {
            float acc = 0.f;
            for (int t = -2; t <= 2; ++t) acc += k[t + 2] * tmp[static_cast<size_t>(clampi(y + t, 0, sh - 1)) * sw + x];
            blurred[static_cast<size_t>(y) * sw + x] = acc;
        }

    std::vector<float> out(static_cast<size_t>(dw) * dh);
    const double sx = static_cast<double>(sw) / dw;
    const double sy = static_cast<double>(sh) / dh;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < dh; ++y) {
        const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
        const int y0 = std::min(static_cast<int>(fy), sh - 1);
        const int y1 = std::min(y0 + 1, sh - 1);
        const double wy = fy - y0;
        for (int x = 0; x < dw; ++x) {
            const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
            const int x0 = std::min(static_cast<int>(fx), sw - 1);
            const int x1 = std::min(x0 + 1, sw - 1);
            const double wx = fx - x0;
            const double top = blurred[static_cast<size_t>(y0) * sw + x0] * (1 - wx) +
                               blurred[static_cast<size_t>(y0) * sw + x1] * wx;
            const double bot = blurred[static_cast<size_t>(y1) * sw + x0] * (1 - wx) +
                               blurred[static_cast<size_t>(y1) * sw + x1] * wx;
            out[static_cast<size_t>(y) * dw + x] = static_cast<float>(top * (1 - wy) + bot * wy);
        }
    }
    return out;
}

// Bilinear flow upsampling with value rescaling to the finer grid.
FlowField upsample_flow(const FlowField& coarse, int dw, int dh) {
    FlowField out(dw, dh);
    const double rx = static_cast<double>(dw) / coarse.width;
    const double ry = static_cast<double>(dh) / coarse.height;
    const double sx = 1.0 / rx, sy = 1.0 / ry;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < dh; ++y) {
        const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
        const int y0 = std::min(static_cast<int>(fy), coarse.height - 1);
        const int y1 = std::min(y0 + 1, coarse.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < dw; ++x) {
            const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
            const int x0 = std::min(static_cast<int>(fx), coarse.width - 1);
            const int x1 = std::min(x0 + 1, coarse.width - 1);
            const double wx = fx - x0;
            auto lerp2 = [&](const std::vector<float>& g) {
                const double top = g[static_cast<size_t>(y0) * coarse.width + x0] * (1 - wx) +
                                   g[static_cast<size_t>(y0) * coarse.width + x1] * wx;
                const double bot = g[static_cast<size_t>(y1) * coarse.width + x0] * (1 - wx) +
                                   g[static_cast<size_t>(y1) * coarse.width + x1] * wx;
                return top * (1 - wy) + bot * wy;
            };
            out.vx[static_cast<size_t>(y) * dw + x] = static_cast<float>(lerp2(coarse.vx) * rx);
            out.vy[static_cast<size_t>(y) * dw + x] = static_cast<float>(lerp2(coarse.vy) * ry);
        }
    }
    return out;
}

// Separable box blur over the 5 normal-equation planes.
void box_blur(std::vector<float>& data, int width, int height, int planes, int window) {
    const int half = window / 2;
    std::vector<float> tmp(data.size());
    const float inv = 1.0f / window;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y)
        for (int p = 0; p < planes; ++p) {
            const size_t row = (static_cast<size_t>(y) * width) * planes + p;
            for (int x = 0; x < width; ++x) {
                float acc = 0.f;
                for (int t = -half; t <= half; ++t)
                    acc += data[row + static_cast<size_t>(clampi(x + t, 0, width - 1)) * planes];
                tmp[row + static_cast<size_t>(x) * planes] = acc * inv;
            }
        }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y)
        for (int p = 0; p < planes; ++p)
            for (int x = 0; x < width; ++x) {
                float acc = 0.f;
                for (int t = -half; t <= half; ++t)
                    acc += tmp[(static_cast<size_t>(clampi(y + t, 0, height - 1)) * width + x) * planes + p];
                data[(static_cast<size_t>(y) * width + x) * planes + p] = acc * inv;
            }
}

// One displacement refinement: match expansions under the current flow,
// smooth the per-pixel 2x2 systems, and re-solve.
void refine_flow(const PolyExpansion& r1, const PolyExpansion& r2, FlowField& flow, int window) {
    const int w = r1.width, h = r1.height;
    std::vector<float> m(static_cast<size_t>(w) * h * 5);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t idx = static_cast<size_t>(y) * w + x;
            const int tx = clampi(x + static_cast<int>(std::lround(flow.vx[idx])), 0, w - 1);
            const int ty = clampi(y + static_cast<int>(std::lround(flow.vy[idx])), 0, h - 1);
            const float dx = static_cast<float>(tx - x);
            const float dy = static_cast<float>(ty - y);
            const float* c1 = r1.at(x, y);
            const float* c2 = r2.at(tx, ty);
            const float a11 = 0.5f * (c1[3] + c2[3]);
            const float a22 = 0.5f * (c1[4] + c2[4]);
            const float a12 = 0.25f * (c1[5] + c2[5]);
            float db_x = 0.5f * (c1[1] - c2[1]);
            float db_y = 0.5f * (c1[2] - c2[2]);
            db_x += a11 * dx + a12 * dy;
            db_y += a12 * dx + a22 * dy;
            float* out = &m[idx * 5];
            out[0] = a11 * a11 + a12 * a12;
            out[1] = a12 * (a11 + a22);
            out[2] = a22 * a22 + a12 * a12;
            out[3] = a11 * db_x + a12 * db_y;
            out[4] = a12 * db_x + a22 * db_y;
        }

    box_blur(m, w, h, 5, window);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float* g = &m[(static_cast<size_t>(y) * w + x) * 5];
            // Relative Tikhonov damping: harmless on textured pixels, pulls
            // aperture-degenerate systems toward zero instead of blowing up.
            const double lambda = 1e-6 * (static_cast<double>(g[0]) + g[2]) + 1e-30;
            const double g00 = g[0] + lambda;
            const double g11 = g[2] + lambda;
            const double det = g00 * g11 - static_cast<double>(g[1]) * g[1];
            flow.vx[static_cast<size_t>(y) * w + x] = static_cast<float>((g11 * g[3] - g[1] * g[4]) / det);
            flow.vy[static_cast<size_t>(y) * w + x] = static_cast<float>((g00 * g[4] - g[1] * g[3]) / det);
        }
}

} // namespace

PolyExpansion polynomial_expansion(const std::vector<float>& intensities, int width, int height, int poly_n,
                                   double poly_sigma) {
    const int n = (poly_n - 1) / 2;
    std::vector<double> g(poly_n);
    for (int t = -n; t <= n; ++t) g[t + n] = std::exp(-t * t / (2.0 * poly_sigma * poly_sigma));

    // Gram matrix of the basis (1, x, y, x^2, y^2, xy) under w = g(x)g(y).
    std::array<double, 36> gram{};
    for (int dy = -n; dy <= n; ++dy)
        for (int dx = -n; dx <= n; ++dx) {
            const double w = g[dx + n] * g[dy + n];
            const double phi[6] = {1.0, static_cast<double>(dx), static_cast<double>(dy),
                                   static_cast<double>(dx) * dx, static_cast<double>(dy) * dy,
                                   static_cast<double>(dx) * dy};
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b) gram[a * 6 + b] += w * phi[a] * phi[b];
        }
    const std::array<double, 36> gram_inv = invert6(gram);

    // Separable projections: per-row moments in x, then combined down columns.
    std::vector<float> mom(static_cast<size_t>(width) * height * 3);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double m0 = 0, m1 = 0, m2 = 0;
            for (int t = -n; t <= n; ++t) {
                const double v = g[t + n] * intensities[static_cast<size_t>(y) * width + clampi(x + t, 0, width - 1)];
                m0 += v;
                m1 += v * t;
                m2 += v * t * t;
            }
            float* out = &mom[(static_cast<size_t>(y) * width + x) * 3];
            out[0] = static_cast<float>(m0);
            out[1] = static_cast<float>(m1);
            out[2] = static_cast<float>(m2);
        }

    PolyExpansion exp;
    exp.width = width;
    exp.height = height;
    exp.coef.resize(static_cast<size_t>(width) * height * 6);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double proj[6] = {0, 0, 0, 0, 0, 0}; // (1, x, y, x^2, y^2, xy)
            for (int t = -n; t <= n; ++t) {
                const float* mm = &mom[(static_cast<size_t>(clampi(y + t, 0, height - 1)) * width + x) * 3];
                const double gy = g[t + n];
                proj[0] += gy * mm[0];
                proj[1] += gy * mm[1];
                proj[2] += gy * t * mm[0];
                proj[3] += gy * mm[2];
                proj[4] += gy * t * t * mm[0];
                proj[5] += gy * t * mm[1];
            }
            float* out = &exp.coef[(static_cast<size_t>(y) * width + x) * 6];
            for (int a = 0; a < 6; ++a) {
                double acc = 0;
                for (int b = 0; b < 6; ++b) acc += gram_inv[a * 6 + b] * proj[b];
                out[a] = static_cast<float>(acc);
            }
        }
    return exp;
}

PolyExpansion polynomial_expansion(const Frame& frame, int poly_n, double poly_sigma) {
    return polynomial_expansion(frame_to_unit(frame), frame.width, frame.height, poly_n, poly_sigma);
}

FlowField estimate_flow(const Frame& prev, const Frame& next, const FlowParams& params) {
    if (prev.width != next.width || prev.height != next.height)
        throw MalformedInputError("estimate_flow: dimension mismatch " + std::to_string(prev.width) + "x" +
                                  std::to_string(prev.height) + " vs " + std::to_string(next.width) + "x" +
                                  std::to_string(next.height));

    struct Level {
        int w, h;
        std::vector<float> a, b;
    };
    std::vector<Level> levels;
    Level base{prev.width, prev.height, frame_to_unit(prev), frame_to_unit(next)};
    levels.push_back(std::move(base));
    for (int l = 1; l < params.pyramid_levels; ++l) {
        const Level& up = levels.back();
        const double s = params.pyramid_scale;
        const int w = std::max(8, static_cast<int>(std::lround(up.w * s)));
        const int h = std::max(8, static_cast<int>(std::lround(up.h * s)));
        if (w == up.w && h == up.h) break;
        Level lvl{w, h, smooth_and_resize(up.a, up.w, up.h, w, h), smooth_and_resize(up.b, up.w, up.h, w, h)};
        levels.push_back(std::move(lvl));
    }

    FlowField flow(levels.back().w, levels.back().h);
    for (int l = static_cast<int>(levels.size()) - 1; l >= 0; --l) {
        const Level& lvl = levels[l];
        if (flow.width != lvl.w || flow.height != lvl.h) flow = upsample_flow(flow, lvl.w, lvl.h);
        const PolyExpansion r1 = polynomial_expansion(lvl.a, lvl.w, lvl.h, params.poly_n, params.poly_sigma);
        const PolyExpansion r2 = polynomial_expansion(lvl.b, lvl.w, lvl.h, params.poly_n, params.poly_sigma);
        for (int it = 0; it < params.iterations; ++it) refine_flow(r1, r2, flow, params.window_size);
    }
    return flow;
}

std::vector<FlowField> flow_for_clip(const Clip& clip, const FlowParams& params) {
    std::vector<FlowField> fields(clip.length());
    if (clip.length() == 0) return fields;
    fields[0] = FlowField(clip.frames[0].width, clip.frames[0].height);
#pragma omp parallel for schedule(dynamic)
    for (size_t i = 1; i < clip.length(); ++i) fields[i] = estimate_flow(clip.frames[i - 1], clip.frames[i], params);
    return fields;
}

} // namespace tev
