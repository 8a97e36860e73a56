#include "tev/background.hpp"

#include <algorithm>
#include <cmath>

#include "tev/common.hpp"

namespace tev {

double ForegroundMask::foreground_fraction() const {
    if (fg.empty()) return 0.0;
    size_t count = 0;
    for (uint8_t v : fg) count += v;
    return static_cast<double>(count) / static_cast<double>(fg.size());
}

BackgroundState::BackgroundState(const Frame& first_frame, const BgParams& params)
    : width_(first_frame.width), height_(first_frame.height), params_(params) {
    if (params.learning_rate <= 0.0 || params.learning_rate >= 1.0)
        throw ConfigError("background learning_rate must be in (0,1)");
    if (params.match_threshold <= 0.0) throw ConfigError("background match_threshold must be positive");
    if (params.background_ratio <= 0.0 || params.background_ratio >= 1.0)
        throw ConfigError("background_ratio must be in (0,1)");
    if (params.components < 1) throw ConfigError("background needs at least one component");

    mixtures_.assign(static_cast<size_t>(width_) * height_ * params.components, MixtureComponent{});
    for (size_t i = 0; i < first_frame.pixels.size(); ++i) {
        MixtureComponent& c = mixtures_[i * params.components];
        c.mean = first_frame.pixels[i];
        c.variance = static_cast<float>(params.initial_variance);
        c.weight = 1.0f;
    }
}

ForegroundMask BackgroundState::update(const Frame& frame) {
    if (frame.width != width_ || frame.height != height_)
        throw MalformedInputError("bg_update: frame " + std::to_string(frame.width) + "x" +
                                  std::to_string(frame.height) + " vs state " + std::to_string(width_) + "x" +
                                  std::to_string(height_));

    const int K = params_.components;
    const float alpha = static_cast<float>(params_.learning_rate);
    const float lambda = static_cast<float>(params_.match_threshold);
    const float ratio = static_cast<float>(params_.background_ratio);
    const float floor_var = static_cast<float>(params_.variance_floor);
    const float init_var = static_cast<float>(params_.initial_variance);

    ForegroundMask mask(width_, height_);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            const size_t pi = static_cast<size_t>(y) * width_ + x;
            MixtureComponent* comp = &mixtures_[pi * K];
            const float value = frame.pixels[pi];

            // Background set: leading components whose cumulative weight
            // first exceeds the ratio (components stay weight-sorted).
            int bg_count = 0;
            float cumulative = 0.0f;
            for (int k = 0; k < K; ++k) {
                if (comp[k].weight <= 0.0f) break;
                ++bg_count;
                cumulative += comp[k].weight;
                if (cumulative > ratio) break;
            }

            int matched = -1;
            for (int k = 0; k < K; ++k) {
                if (comp[k].weight <= 0.0f) break;
                const float sigma = std::sqrt(comp[k].variance);
                if (std::abs(value - comp[k].mean) < lambda * sigma) {
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
                // Replace the weakest slot with a fresh component.
                int slot = K - 1;
                for (int k = 0; k < K; ++k)
                    if (comp[k].weight <= 0.0f) { slot = k; break; }
                for (int k = 0; k < K; ++k) comp[k].weight *= (1.0f - alpha);
                comp[slot].mean = value;
                comp[slot].variance = init_var;
                comp[slot].weight = alpha;
            }

            float total = 0.0f;
            for (int k = 0; k < K; ++k) {
                if (comp[k].variance < floor_var && comp[k].weight > 0.0f) comp[k].variance = floor_var;
                total += comp[k].weight;
            }
            for (int k = 0; k < K; ++k) comp[k].weight /= total;

            // Keep descending weight order (insertion sort; K is tiny).
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
    }
    return mask;
}

BackgroundState bg_init(const Frame& first_frame, const BgParams& params) {
    return BackgroundState(first_frame, params);
}

ForegroundMask bg_update(BackgroundState& state, const Frame& frame) { return state.update(frame); }

} // namespace tev
