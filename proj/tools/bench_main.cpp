// Timing comparison between the serial reference implementations and the
// OpenMP kernels, on the shapes the pipeline actually runs.

#include <chrono>
#include <cstdio>
#include <functional>

#include <omp.h>

#include "ref/reference.hpp"
#include "tev/nn.hpp"
#include "tev/synth.hpp"

namespace {

using namespace tev;

double time_best_ms(const std::function<void()>& fn, int reps = 5) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.2f ms %12.2f ms %8.2fx\n", name, serial_ms, parallel_ms, serial_ms / parallel_ms);
}

std::vector<float> random_floats(Rng& rng, size_t n, double lo, double hi) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

} // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-28s %13s %15s %9s\n", "kernel", "serial", "parallel", "speedup");

    Rng rng(7);

    { // conv2d forward, second-stage shape (58x78x16 -> 5x5x16x32)
        const int H = 58, W = 78, C = 16, K = 5, F = 32;
        const auto in = random_floats(rng, static_cast<size_t>(H) * W * C, -1, 1);
        const auto ker = random_floats(rng, static_cast<size_t>(K) * K * C * F, -0.1, 0.1);
        const auto bias = random_floats(rng, F, -0.1, 0.1);
        std::vector<float> out(static_cast<size_t>(H - K + 1) * (W - K + 1) * F);
        const double serial = time_best_ms([&] { ref::naive_conv2d(in, H, W, C, ker, K, F, bias); });
        const double parallel = time_best_ms(
            [&] { nn::kernels::conv2d_forward(in.data(), H, W, C, ker.data(), K, F, bias.data(), out.data()); });
        row("conv2d fwd 58x78x16->32", serial, parallel);
    }

    { // polynomial expansion at full frame resolution
        const auto img = random_floats(rng, static_cast<size_t>(kFrameWidth) * kFrameHeight, 0, 1);
        const double serial = time_best_ms([&] {
            for (int y = 0; y < kFrameHeight; y += 4)
                for (int x = 0; x < kFrameWidth; x += 4) ref::ls_quadratic_fit(img, kFrameWidth, kFrameHeight, x, y, 5, 1.1);
        }) * 16.0; // sampled every 4th pixel in both axes
        const double parallel =
            time_best_ms([&] { polynomial_expansion(img, kFrameWidth, kFrameHeight, 5, 1.1); });
        row("poly expansion 160x120", serial, parallel);
    }

    { // background update over a synthetic clip
        ScenarioConfig config;
        config.seed = 3;
        config.kind = ScenarioKind::Stationary;
        config.n_background_vehicles = 2;
        const Clip clip = generate_clip(config);
        const double serial = time_best_ms([&] {
            ref::SerialBackground bg(clip.frames[0], BgParams{});
            for (int t = 0; t < 50; ++t) bg.update(clip.frames[t]);
        }, 3);
        const double parallel = time_best_ms([&] {
            BackgroundState bg(clip.frames[0], BgParams{});
            for (int t = 0; t < 50; ++t) bg.update(clip.frames[t]);
        }, 3);
        row("background 50 frames", serial, parallel);

        // dense flow between two frames
        FlowParams params;
        const double flow_ms = time_best_ms([&] { estimate_flow(clip.frames[60], clip.frames[61], params); }, 3);
        std::printf("%-28s %13s %12.2f ms\n", "estimate_flow 160x120", "-", flow_ms);

        // stripe histograms
        const FlowField field = estimate_flow(clip.frames[60], clip.frames[61], params);
        QuantizerConfig q;
        const double hist_serial = time_best_ms([&] { ref::serial_stripe_histograms(field, q.level_thresholds); });
        const double hist_parallel = time_best_ms([&] { stripe_histograms(field, q); });
        row("stripe histograms", hist_serial, hist_parallel);
    }

    { // big dense layer, clip-batched (125 x 31968 -> 256)
        const int steps = 125, in_dim = 27 * 37 * 32, out_dim = 256;
        const auto x = random_floats(rng, static_cast<size_t>(steps) * in_dim, -1, 1);
        const auto w = random_floats(rng, static_cast<size_t>(out_dim) * in_dim, -0.05, 0.05);
        const auto b = random_floats(rng, out_dim, -0.1, 0.1);
        std::vector<float> y(static_cast<size_t>(steps) * out_dim);
        const double serial = time_best_ms([&] {
            for (int t = 0; t < steps; t += 25) // sampled rows
                ref::naive_dense(w, b, std::vector<float>(x.begin() + static_cast<size_t>(t) * in_dim,
                                                          x.begin() + static_cast<size_t>(t + 1) * in_dim));
        }, 3) * 25.0;
        const double parallel =
            time_best_ms([&] { nn::kernels::gemm_nt(x.data(), w.data(), y.data(), steps, out_dim, in_dim, false); }, 3);
        row("dense 125x31968->256", serial, parallel);
    }

    return 0;
}
