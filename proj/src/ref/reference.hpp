#pragma once

// Plain serial reference implementations, kept deliberately independent of
// the OpenMP kernels they are checked against. Tests use them as oracles;
// the benchmark tool compares their timings with the parallel paths.

#include <array>
#include <vector>

#include "tev/background.hpp"
#include "tev/features.hpp"
#include "tev/flow.hpp"
#include "tev/image.hpp"

namespace tev::ref {

/// Quadruple-loop valid convolution, channel-last, stride 1.
template <typename T>
std::vector<T> naive_conv2d(const std::vector<T>& in, int H, int W, int C, const std::vector<T>& ker, int K, int F,
                            const std::vector<T>& bias) {
    const int OH = H - K + 1;
    const int OW = W - K + 1;
    std::vector<T> out(static_cast<size_t>(OH) * OW * F);
    for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox)
            for (int f = 0; f < F; ++f) {
                T acc = bias.empty() ? T(0) : bias[f];
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx)
                        for (int c = 0; c < C; ++c)
                            acc += in[((static_cast<size_t>(oy + ky)) * W + (ox + kx)) * C + c] *
                                   ker[((static_cast<size_t>(ky) * K + kx) * C + c) * F + f];
                out[(static_cast<size_t>(oy) * OW + ox) * F + f] = acc;
            }
    return out;
}

/// y = W x + b, straight loops.
template <typename T>
std::vector<T> naive_dense(const std::vector<T>& w, const std::vector<T>& b, const std::vector<T>& x) {
    const size_t m = b.size();
    const size_t n = x.size();
    std::vector<T> y(m);
    for (size_t i = 0; i < m; ++i) {
        T acc = b[i];
        for (size_t j = 0; j < n; ++j) acc += w[i * n + j] * x[j];
        y[i] = acc;
    }
    return y;
}

/// Per-pixel weighted least-squares quadratic fit solved from explicitly
/// assembled normal equations (no separable tricks). Coefficient order
/// matches PolyExpansion: [c, bx, by, axx, ayy, axy].
std::array<double, 6> ls_quadratic_fit(const std::vector<float>& img, int width, int height, int cx, int cy,
                                       int poly_n, double poly_sigma);

/// Serial brute-force stripe histograms with its own quantization arithmetic.
std::array<float, kStripes * kHistBins> serial_stripe_histograms(const FlowField& flow,
                                                                 const std::array<double, 4>& thresholds);

/// Serial single-component-at-a-time mixture update, one full frame pass.
/// State layout matches BackgroundState semantics but is tracked locally.
class SerialBackground {
public:
    SerialBackground(const Frame& first, const BgParams& params);
    ForegroundMask update(const Frame& frame);

private:
    int width_, height_;
    BgParams params_;
    std::vector<MixtureComponent> mix_;
};

} // namespace tev::ref
