#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tev::ref {

namespace {

// Solve the 6x6 system G a = r in place by Gaussian elimination with
// partial pivoting.
std::array<double, 6> solve6(std::array<std::array<double, 6>, 6> g, std::array<double, 6> r) {
    for (int col = 0; col < 6; ++col) {
        int pivot = col;
        for (int row = col + 1; row < 6; ++row)
            if (std::abs(g[row][col]) > std::abs(g[pivot][col])) pivot = row;
        std::swap(g[col], g[pivot]);
        std::swap(r[col], r[pivot]);
        for (int row = 0; row < 6; ++row) {
            if (row == col) continue;
            const double f = g[row][col] / g[col][col];
            for (int c = col; c < 6; ++c) g[row][c] -= f * g[col][c];
            r[row] -= f * r[col];
        }
    }
    std::array<double, 6> a{};
    for (int i = 0; i < 6; ++i) a[i] = r[i] / g[i][i];
    return a;
}

} // namespace

std::array<double, 6> ls_quadratic_fit(const std::vector<float>& img, int width, int height, int cx, int cy,
                                       int poly_n, double poly_sigma) {
    const int n = (poly_n - 1) / 2;
    std::array<std::array<double, 6>, 6> gram{};
    std::array<double, 6> rhs{};
    for (int dy = -n; dy <= n; ++dy)
        for (int dx = -n; dx <= n; ++dx) {
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * poly_sigma * poly_sigma));
            const int sx = std::clamp(cx + dx, 0, width - 1);
            const int sy = std::clamp(cy + dy, 0, height - 1);
            const double v = img[static_cast<size_t>(sy) * width + sx];
            const double phi[6] = {1.0, static_cast<double>(dx), static_cast<double>(dy),
                                   static_cast<double>(dx) * dx, static_cast<double>(dy) * dy,
                                   static_cast<double>(dx) * dy};
            for (int a = 0; a < 6; ++a) {
                for (int b = 0; b < 6; ++b) gram[a][b] += w * phi[a] * phi[b];
                rhs[a] += w * phi[a] * v;
            }
        }
    return solve6(gram, rhs);
}

std::array<float, kStripes * kHistBins> serial_stripe_histograms(const FlowField& flow,
                                                                 const std::array<double, 4>& thresholds) {
    std::array<float, kStripes * kHistBins> out{};
    const int stripe_rows = flow.height / kStripes;
    const double area = static_cast<double>(stripe_rows) * flow.width;
    for (int y = 0; y < flow.height; ++y) {
        const int stripe = y / stripe_rows;
        for (int x = 0; x < flow.width; ++x) {
            const size_t i = static_cast<size_t>(y) * flow.width + x;
            const double vx = flow.vx[i];
            const double vy = flow.vy[i];
            const double mag = std::sqrt(vx * vx + vy * vy);
            if (mag < thresholds[0]) continue;
            double angle = std::atan2(vy, vx);
            if (angle < 0.0) angle += 2.0 * std::numbers::pi;
            int dir = static_cast<int>(angle / (std::numbers::pi / 4.0));
            if (dir > 7) dir = 7;
            int level = 0;
            if (mag >= thresholds[3]) level = 3;
            else if (mag >= thresholds[2]) level = 2;
            else if (mag >= thresholds[1]) level = 1;
            out[static_cast<size_t>(stripe) * kHistBins + level * 8 + dir] += 1.0f;
        }
    }
    for (auto& v : out) v = static_cast<float>(v / area);
    return out;
}

SerialBackground::SerialBackground(const Frame& first, const BgParams& params)
    : width_(first.width), height_(first.height), params_(params) {
    mix_.assign(static_cast<size_t>(width_) * height_ * params.components, MixtureComponent{});
    for (size_t i = 0; i < first.pixels.size(); ++i) {
        mix_[i * params.components].mean = first.pixels[i];
        mix_[i * params.components].variance = static_cast<float>(params.initial_variance);
        mix_[i * params.components].weight = 1.0f;
    }
}

ForegroundMask SerialBackground::update(const Frame& frame) {
    const int K = params_.components;
    const float alpha = static_cast<float>(params_.learning_rate);
    ForegroundMask mask(width_, height_);
    for (size_t pi = 0; pi < frame.pixels.size(); ++pi) {
        MixtureComponent* comp = &mix_[pi * K];
        const float value = frame.pixels[pi];

        int bg_count = 0;
        float cumulative = 0.0f;
        for (int k = 0; k < K; ++k) {
            if (comp[k].weight <= 0.0f) break;
            ++bg_count;
            cumulative += comp[k].weight;
            if (cumulative > static_cast<float>(params_.background_ratio)) break;
        }

        int matched = -1;
        for (int k = 0; k < K; ++k) {
            if (comp[k].weight <= 0.0f) break;
            if (std::abs(value - comp[k].mean) <
                static_cast<float>(params_.match_threshold) * std::sqrt(comp[k].variance)) {
                matched = k;
                break;
            }
        }
        mask.fg[pi] = (matched >= 0 && matched < bg_count) ? 0 : 1;

        if (matched >= 0) {
            for (int k = 0; k < K; ++k) comp[k].weight *= (1.0f - alpha);
            comp[matched].weight += alpha;
            const float d = value - comp[matched].mean;
            comp[matched].mean += alpha * d;
            comp[matched].variance += alpha * (d * d - comp[matched].variance);
        } else {
            int slot = K - 1;
            for (int k = 0; k < K; ++k)
                if (comp[k].weight <= 0.0f) { slot = k; break; }
            for (int k = 0; k < K; ++k) comp[k].weight *= (1.0f - alpha);
            comp[slot].mean = value;
            comp[slot].variance = static_cast<float>(params_.initial_variance);
            comp[slot].weight = alpha;
        }

        float total = 0.0f;
        for (int k = 0; k < K; ++k) {
            if (comp[k].variance < static_cast<float>(params_.variance_floor) && comp[k].weight > 0.0f)
                comp[k].variance = static_cast<float>(params_.variance_floor);
            total += comp[k].weight;
        }
        for (int k = 0; k < K; ++k) comp[k].weight /= total;
        for (int k = 1; k < K; ++k) {
            MixtureComponent c = comp[k];
            int j = k - 1;
            while (j >= 0 && comp[j].weight < c.weight) {
                comp[j + 1] = comp[j];
                --j;
            }
            comp[j + 1] = c;
        }
    }
    return mask;
}

} // namespace tev::ref
