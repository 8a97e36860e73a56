#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tev/nn_kernels.hpp"
#include "tev/rng.hpp"
#include "tev/tensor.hpp"

namespace tev::nn {

enum class Activation { Identity, Relu, Sigmoid };

template <typename T>
inline T sigmoid(T z) {
    return T(1) / (T(1) + std::exp(-z));
}

template <typename T>
inline T apply_activation(Activation act, T z) {
    switch (act) {
        case Activation::Identity: return z;
        case Activation::Relu: return z > T(0) ? z : T(0);
        case Activation::Sigmoid: return sigmoid(z);
    }
    return z;
}

/// Derivative expressed through the activation output.
template <typename T>
inline T activation_grad_from_output(Activation act, T y) {
    switch (act) {
        case Activation::Identity: return T(1);
        case Activation::Relu: return y > T(0) ? T(1) : T(0);
        case Activation::Sigmoid: return y * (T(1) - y);
    }
    return T(1);
}

/// Fully connected layer, out = act(W x + b), with step and whole-sequence
/// entry points. Step caches are indexed by time so BPTT can replay them.
template <typename T>
class Dense {
public:
    Dense(const std::string& name, int in_dim, int out_dim, Activation act)
        : weight(name + ".weight", {out_dim, in_dim}), bias(name + ".bias", {out_dim}), in_(in_dim), out_(out_dim),
          act_(act) {}

    void init(Rng& rng) {
        for (auto& v : weight.value.values) v = static_cast<T>(rng.truncated_normal(0.1));
        bias.value.fill(T(0));
    }

    void set_steps(int steps) {
        steps_ = steps;
        cache_x_.assign(static_cast<size_t>(steps) * in_, T(0));
        cache_y_.assign(static_cast<size_t>(steps) * out_, T(0));
    }

    void forward_step(int t, const T* x, T* y) {
        kernels::gemv(weight.value.data(), x, y, out_, in_, false);
        for (int i = 0; i < out_; ++i) y[i] = apply_activation(act_, y[i] + bias.value.values[i]);
        std::copy(x, x + in_, &cache_x_[static_cast<size_t>(t) * in_]);
        std::copy(y, y + out_, &cache_y_[static_cast<size_t>(t) * out_]);
    }

    /// Accumulates parameter gradients; dx may be null for input layers.
    void backward_step(int t, const T* dy, T* dx) {
        const T* x = &cache_x_[static_cast<size_t>(t) * in_];
        const T* y = &cache_y_[static_cast<size_t>(t) * out_];
        std::vector<T> dpre(out_);
        for (int i = 0; i < out_; ++i) dpre[i] = dy[i] * activation_grad_from_output(act_, y[i]);
        for (int i = 0; i < out_; ++i) {
            const T d = dpre[i];
            if (d == T(0)) continue;
            T* wr = &weight.grad.values[static_cast<size_t>(i) * in_];
#pragma omp simd
            for (int j = 0; j < in_; ++j) wr[j] += d * x[j];
            bias.grad.values[i] += d;
        }
        if (dx) {
            std::fill(dx, dx + in_, T(0));
            kernels::gemv_t_acc(weight.value.data(), dpre.data(), dx, out_, in_);
        }
    }

    void forward_batch(int steps, const T* x, T* y) {
        std::copy(x, x + static_cast<size_t>(steps) * in_, cache_x_.begin());
        kernels::gemm_nt(x, weight.value.data(), y, steps, out_, in_, false);
#pragma omp parallel for schedule(static)
        for (int t = 0; t < steps; ++t) {
            T* row = y + static_cast<size_t>(t) * out_;
            for (int i = 0; i < out_; ++i) row[i] = apply_activation(act_, row[i] + bias.value.values[i]);
        }
        std::copy(y, y + static_cast<size_t>(steps) * out_, cache_y_.begin());
    }

    void backward_batch(int steps, const T* dy, T* dx) {
        std::vector<T> dpre(static_cast<size_t>(steps) * out_);
#pragma omp parallel for schedule(static)
        for (int t = 0; t < steps; ++t)
            for (int i = 0; i < out_; ++i) {
                const size_t idx = static_cast<size_t>(t) * out_ + i;
                dpre[idx] = dy[idx] * activation_grad_from_output(act_, cache_y_[idx]);
            }
        kernels::gemm_tn_acc(dpre.data(), cache_x_.data(), weight.grad.data(), out_, in_, steps);
        for (int t = 0; t < steps; ++t)
            for (int i = 0; i < out_; ++i) bias.grad.values[i] += dpre[static_cast<size_t>(t) * out_ + i];
        if (dx) kernels::gemm_nn(dpre.data(), weight.value.data(), dx, steps, in_, out_);
    }

    int in_dim() const { return in_; }
    int out_dim() const { return out_; }

    Parameter<T> weight; // [out x in]
    Parameter<T> bias;

private:
    int in_, out_;
    Activation act_;
    int steps_ = 0;
    std::vector<T> cache_x_, cache_y_;
};

/// Valid-padding, stride-1 2-D convolution with bias (no activation).
template <typename T>
class Conv2d {
public:
    Conv2d(const std::string& name, int kernel, int in_ch, int out_ch)
        : kernels_param(name + ".kernels", {kernel, kernel, in_ch, out_ch}), bias(name + ".bias", {out_ch}),
          k_(kernel), in_ch_(in_ch), out_ch_(out_ch) {}

    void init(Rng& rng) {
        for (auto& v : kernels_param.value.values) v = static_cast<T>(rng.truncated_normal(0.1));
        bias.value.fill(T(0));
    }

    void check_input(int H, int W) const {
        if (k_ > H || k_ > W)
            throw ShapeError(kernels_param.name + ": kernel " + std::to_string(k_) + "x" + std::to_string(k_) +
                             " larger than input " + std::to_string(H) + "x" + std::to_string(W));
    }

    void set_steps(int steps, int H, int W) {
        check_input(H, W);
        cache_h_ = H;
        cache_w_ = W;
        cache_in_.assign(static_cast<size_t>(steps) * H * W * in_ch_, T(0));
    }

    void forward_step(int t, const T* in, int H, int W, T* out) {
        check_input(H, W);
        kernels::conv2d_forward(in, H, W, in_ch_, kernels_param.value.data(), k_, out_ch_, bias.value.data(), out);
        std::copy(in, in + static_cast<size_t>(H) * W * in_ch_, &cache_in_[cache_offset(t)]);
    }

    /// din may be null (first layer). dout is the gradient at the raw
    /// convolution output.
    void backward_step(int t, const T* dout, int H, int W, T* din) {
        const T* in = &cache_in_[cache_offset(t)];
        kernels::conv2d_weight_grad(in, H, W, in_ch_, dout, k_, out_ch_, kernels_param.grad.data(),
                                    bias.grad.data());
        if (din) kernels::conv2d_input_grad(dout, H - k_ + 1, W - k_ + 1, out_ch_, kernels_param.value.data(), k_,
                                            in_ch_, din, H, W);
    }

    int kernel() const { return k_; }
    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }

    Parameter<T> kernels_param; // [k x k x C x F]
    Parameter<T> bias;

private:
    size_t cache_offset(int t) const { return static_cast<size_t>(t) * cache_h_ * cache_w_ * in_ch_; }

    int k_, in_ch_, out_ch_;
    int cache_h_ = 0, cache_w_ = 0;
    std::vector<T> cache_in_;
};

/// Non-overlapping 2x2 max pooling; both extents must be even.
template <typename T>
class MaxPool2x2 {
public:
    void set_steps(int steps, int H, int W, int C) {
        check_input(H, W);
        cells_ = static_cast<size_t>(H / 2) * (W / 2) * C;
        argmax_.assign(static_cast<size_t>(steps) * cells_, 0);
    }

    static void check_input(int H, int W) {
        if (H % 2 != 0 || W % 2 != 0)
            throw ShapeError("maxpool2x2: extents must be even, got " + std::to_string(H) + "x" + std::to_string(W));
    }

    void forward_step(int t, const T* in, int H, int W, int C, T* out) {
        check_input(H, W);
        kernels::maxpool2_forward(in, H, W, C, out, &argmax_[static_cast<size_t>(t) * cells_]);
    }

    void backward_step(int t, const T* dout, int OH, int OW, int C, T* din) {
        kernels::maxpool2_backward(dout, OH, OW, C, &argmax_[static_cast<size_t>(t) * cells_], din);
    }

private:
    size_t cells_ = 0;
    std::vector<uint8_t> argmax_;
};

/// LSTM with forget gate, no peepholes. Step forward keeps streaming state;
/// backward replays the cached sequence in reverse.
template <typename T>
class Lstm {
public:
    Lstm(const std::string& name, int in_dim, int hidden)
        : wx(name + ".wx", {4 * hidden, in_dim}), wh(name + ".wh", {4 * hidden, hidden}),
          b(name + ".bias", {4 * hidden}), in_(in_dim), h_(hidden) {
        h_state_.assign(h_, T(0));
        c_state_.assign(h_, T(0));
    }

    void init(Rng& rng) {
        const double bound_x = 1.0 / std::sqrt(static_cast<double>(in_));
        const double bound_h = 1.0 / std::sqrt(static_cast<double>(h_));
        for (auto& v : wx.value.values) v = static_cast<T>(rng.uniform(-bound_x, bound_x));
        for (auto& v : wh.value.values) v = static_cast<T>(rng.uniform(-bound_h, bound_h));
        b.value.fill(T(0));
        for (int i = h_; i < 2 * h_; ++i) b.value.values[i] = T(1); // forget gate
    }

    void reset_state() {
        std::fill(h_state_.begin(), h_state_.end(), T(0));
        std::fill(c_state_.begin(), c_state_.end(), T(0));
    }

    void set_steps(int steps) {
        steps_ = steps;
        cache_x_.assign(static_cast<size_t>(steps) * in_, T(0));
        cache_h_.assign(static_cast<size_t>(steps) * h_, T(0));
        cache_c_.assign(static_cast<size_t>(steps) * h_, T(0));
        cache_tanh_c_.assign(static_cast<size_t>(steps) * h_, T(0));
        cache_gates_.assign(static_cast<size_t>(steps) * 4 * h_, T(0));
        cache_dpre_.assign(static_cast<size_t>(steps) * 4 * h_, T(0));
    }

    /// Gate order in the packed pre-activation: input, forget, cell, output.
    void forward_step(int t, const T* x, T* h_out) {
        std::vector<T> pre(4 * h_);
        std::copy(b.value.values.begin(), b.value.values.end(), pre.begin());
        kernels::gemv(wx.value.data(), x, pre.data(), 4 * h_, in_, true);
        kernels::gemv(wh.value.data(), h_state_.data(), pre.data(), 4 * h_, h_, true);

        T* gates = &cache_gates_[static_cast<size_t>(t) * 4 * h_];
        T* c_row = &cache_c_[static_cast<size_t>(t) * h_];
        T* tc_row = &cache_tanh_c_[static_cast<size_t>(t) * h_];
        for (int i = 0; i < h_; ++i) {
            const T gi = sigmoid(pre[i]);
            const T gf = sigmoid(pre[h_ + i]);
            const T gg = std::tanh(pre[2 * h_ + i]);
            const T go = sigmoid(pre[3 * h_ + i]);
            gates[i] = gi;
            gates[h_ + i] = gf;
            gates[2 * h_ + i] = gg;
            gates[3 * h_ + i] = go;
            const T c_new = gf * c_state_[i] + gi * gg;
            c_row[i] = c_new;
            tc_row[i] = std::tanh(c_new);
            h_state_[i] = go * tc_row[i];
        }
        std::copy(c_row, c_row + h_, c_state_.begin());
        std::copy(x, x + in_, &cache_x_[static_cast<size_t>(t) * in_]);
        std::copy(h_state_.begin(), h_state_.end(), &cache_h_[static_cast<size_t>(t) * h_]);
        if (h_out) std::copy(h_state_.begin(), h_state_.end(), h_out);
    }

    void begin_backward() {
        dh_carry_.assign(h_, T(0));
        dc_carry_.assign(h_, T(0));
    }

    /// Must be called with t descending from steps-1 to 0.
    void backward_step(int t, const T* dh_ext) {
        const T* gates = &cache_gates_[static_cast<size_t>(t) * 4 * h_];
        const T* tc_row = &cache_tanh_c_[static_cast<size_t>(t) * h_];
        const T* c_prev = t > 0 ? &cache_c_[static_cast<size_t>(t - 1) * h_] : nullptr;
        T* dpre = &cache_dpre_[static_cast<size_t>(t) * 4 * h_];

        for (int i = 0; i < h_; ++i) {
            const T gi = gates[i], gf = gates[h_ + i], gg = gates[2 * h_ + i], go = gates[3 * h_ + i];
            const T dh = dh_ext[i] + dh_carry_[i];
            const T dc = dc_carry_[i] + dh * go * (T(1) - tc_row[i] * tc_row[i]);
            const T cp = c_prev ? c_prev[i] : T(0);
            dpre[i] = dc * gg * gi * (T(1) - gi);
            dpre[h_ + i] = dc * cp * gf * (T(1) - gf);
            dpre[2 * h_ + i] = dc * gi * (T(1) - gg * gg);
            dpre[3 * h_ + i] = dh * tc_row[i] * go * (T(1) - go);
            dc_carry_[i] = dc * gf;
        }
        std::fill(dh_carry_.begin(), dh_carry_.end(), T(0));
        kernels::gemv_t_acc(wh.value.data(), dpre, dh_carry_.data(), 4 * h_, h_);
    }

    /// Batched parameter/input gradients after the reverse sweep; dx is
    /// [steps x in] and may be null.
    void finish_backward(int steps, T* dx) {
        kernels::gemm_tn_acc(cache_dpre_.data(), cache_x_.data(), wx.grad.data(), 4 * h_, in_, steps);
        if (steps > 1)
            kernels::gemm_tn_acc(&cache_dpre_[static_cast<size_t>(4) * h_], cache_h_.data(), wh.grad.data(), 4 * h_,
                                 h_, steps - 1);
        for (int t = 0; t < steps; ++t)
            for (int i = 0; i < 4 * h_; ++i) b.grad.values[i] += cache_dpre_[static_cast<size_t>(t) * 4 * h_ + i];
        if (dx) kernels::gemm_nn(cache_dpre_.data(), wx.value.data(), dx, steps, in_, 4 * h_);
    }

    const T* hidden() const { return h_state_.data(); }
    const T* cell() const { return c_state_.data(); }
    const T* cached_h(int t) const { return &cache_h_[static_cast<size_t>(t) * h_]; }
    int in_dim() const { return in_; }
    int hidden_dim() const { return h_; }

    Parameter<T> wx; // [4h x in]
    Parameter<T> wh; // [4h x h]
    Parameter<T> b;  // [4h]

private:
    int in_, h_;
    int steps_ = 0;
    std::vector<T> h_state_, c_state_;
    std::vector<T> cache_x_, cache_h_, cache_c_, cache_tanh_c_, cache_gates_, cache_dpre_;
    std::vector<T> dh_carry_, dc_carry_;
};

inline constexpr double kProbClamp = 1e-7;

/// Per-frame weighted cross-entropy: positives of class h weighted by w[h],
/// negatives unweighted. Scores are clamped to [1e-7, 1-1e-7]; the returned
/// gradient is exact for the clamped composition (zero in the flat region).
template <typename T>
T weighted_bce(const T* p, const bool* target, const T* weights, int n, T* dldp) {
    T loss = T(0);
    for (int i = 0; i < n; ++i) {
        const T lo = static_cast<T>(kProbClamp);
        const T hi = T(1) - lo;
        const T pc = std::min(std::max(p[i], lo), hi);
        const bool clamped = p[i] < lo || p[i] > hi;
        if (target[i]) {
            loss += weights[i] * -std::log(pc);
            if (dldp) dldp[i] = clamped ? T(0) : -weights[i] / pc;
        } else {
            loss += -std::log(T(1) - pc);
            if (dldp) dldp[i] = clamped ? T(0) : T(1) / (T(1) - pc);
        }
    }
    return loss;
}

struct AdamConfig {
    double learning_rate = 3e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam over a fixed parameter set; moments are per element.
template <typename T>
class Adam {
public:
    Adam(std::vector<Parameter<T>*> params, const AdamConfig& config = {}) : params_(std::move(params)), cfg_(config) {
        for (auto* p : params_) {
            m_.emplace_back(p->value.shape);
            v_.emplace_back(p->value.shape);
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    void step() {
        ++t_;
        const T b1 = static_cast<T>(cfg_.beta1);
        const T b2 = static_cast<T>(cfg_.beta2);
        const T corr1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, t_));
        const T corr2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, t_));
        const T lr = static_cast<T>(cfg_.learning_rate);
        const T eps = static_cast<T>(cfg_.epsilon);
        for (size_t pi = 0; pi < params_.size(); ++pi) {
            Parameter<T>& p = *params_[pi];
            T* m = m_[pi].data();
            T* v = v_[pi].data();
            T* theta = p.value.data();
            const T* g = p.grad.data();
            const auto n = static_cast<int64_t>(p.size());
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) {
                m[i] = b1 * m[i] + (T(1) - b1) * g[i];
                v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
                const T mhat = m[i] / corr1;
                const T vhat = v[i] / corr2;
                theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    int64_t steps_taken() const { return t_; }

private:
    std::vector<Parameter<T>*> params_;
    AdamConfig cfg_;
    std::vector<Tensor<T>> m_, v_;
    int64_t t_ = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    size_t elements_checked = 0;
};

/// Central finite differences against analytic gradients. `compute_grads`
/// must zero and repopulate every parameter gradient; `loss` reruns the
/// forward pass alone. 64-bit parameters only.
inline GradCheckResult grad_check(const std::vector<Parameter<double>*>& params,
                                  const std::function<void()>& compute_grads, const std::function<double()>& loss,
                                  double step = 1e-5) {
    compute_grads();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad.values);

    GradCheckResult result;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter<double>& p = *params[pi];
        for (size_t i = 0; i < p.size(); ++i) {
            const double saved = p.value.values[i];
            p.value.values[i] = saved + step;
            const double lp = loss();
            p.value.values[i] = saved - step;
            const double lm = loss();
            p.value.values[i] = saved;
            const double numeric = (lp - lm) / (2.0 * step);
            const double ga = analytic[pi][i];
            const double rel = std::abs(ga - numeric) / std::max({std::abs(ga), std::abs(numeric), 1e-8});
            result.max_rel_error = std::max(result.max_rel_error, rel);
            ++result.elements_checked;
        }
    }
    return result;
}

} // namespace tev::nn
