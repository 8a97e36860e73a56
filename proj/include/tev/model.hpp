#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tev/clip.hpp"
#include "tev/nn.hpp"

namespace tev {

enum class Variant { Hist, Conv, ConvFlow, External };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    Variant variant = Variant::Hist;
    int conv_layers = 2; // 2 or 3, conv variants only
    int rnn_layers = 1;  // 1 or 2
    int hidden = 50;     // LSTM state size
    int external_dim = 0;
    std::array<int, 3> conv_channels{16, 32, 64};
    int conv_dense = 256;
    int input_height = kFrameHeight;
    int input_width = kFrameWidth;
    std::array<float, kNumEventClasses> thresholds{0.5f, 0.5f, 0.5f, 0.5f};

    bool is_conv() const { return variant == Variant::Conv || variant == Variant::ConvFlow; }
    int input_channels() const { return variant == Variant::ConvFlow ? 3 : 1; }
    int input_dim() const;
    void validate() const;
};

struct PredictionScores {
    std::array<float, kNumEventClasses> p{};
};

struct EventDecision {
    std::array<bool, kNumEventClasses> y{};
};

/// y_h = 1 iff p_h >= gamma_h.
template <typename T>
EventDecision decide(const std::array<T, kNumEventClasses>& p, const std::array<float, kNumEventClasses>& gamma) {
    EventDecision d;
    for (int i = 0; i < kNumEventClasses; ++i) d.y[i] = p[i] >= static_cast<T>(gamma[i]);
    return d;
}

/// The four-stage detector: per-frame feature extraction, recurrent sequence
/// state, sigmoid prediction head, thresholded decisions. Stateful streaming
/// and whole-clip paths produce identical scores.
template <typename T>
class EventDetectorModel {
public:
    EventDetectorModel(const ModelConfig& config, uint64_t seed);

    const ModelConfig& config() const { return config_; }
    ModelConfig& mutable_config() { return config_; }
    int input_dim() const { return config_.input_dim(); }

    void reset_state();

    /// One streaming step; the model carries recurrent state between calls.
    std::array<T, kNumEventClasses> step(const T* rep);

    /// Resets state, then scores every frame of the clip.
    std::vector<std::array<T, kNumEventClasses>> forward_clip(const T* reps, int steps);

    /// Forward + BPTT over a whole clip; accumulates parameter gradients and
    /// returns the clip loss (summed over frames). `reps` must stay valid for
    /// the duration of the call.
    T train_clip(const T* reps, int steps, const LabelSet* labels,
                 const std::array<T, kNumEventClasses>& loss_weights);

    std::vector<nn::Parameter<T>*> parameters();
    size_t parameter_count();

private:
    void ensure_steps(int steps);
    // Conv feature stage for one frame; returns the flattened feature row.
    const T* conv_forward_frame(int t, const T* rep);

    ModelConfig config_;

    // Conv-variant stages (unused for hist/external).
    std::optional<nn::Conv2d<T>> conv1_, conv2_, conv3_;
    nn::MaxPool2x2<T> pool1_, pool2_, pool3_;
    std::optional<nn::Dense<T>> feat_dense_;
    std::optional<nn::Lstm<T>> lstm1_, lstm2_;
    std::unique_ptr<nn::Dense<T>> head_;

    // Stage dims (conv variants).
    int h1c_ = 0, w1c_ = 0, h1p_ = 0, w1p_ = 0;
    int h2c_ = 0, w2c_ = 0, h2p_ = 0, w2p_ = 0;
    int h3c_ = 0, w3c_ = 0, h3e_ = 0, w3e_ = 0, h3p_ = 0, w3p_ = 0;
    int flatten_dim_ = 0;

    int steps_ = 0; // allocated sequence capacity (1 in streaming mode)
    int stream_t_ = 0;

    // Per-clip arenas, [steps x stage size].
    std::vector<T> pool1_out_, pool2_out_, pool3_out_, crop_out_;
    std::vector<T> q_, h_last_, p_;
    // Single-frame scratch.
    std::vector<T> conv1_tmp_, conv2_tmp_, conv3_tmp_, crop_tmp_;
    std::vector<T> lstm_h_tmp_;
};

struct Checkpoint {
    ModelConfig config;
    uint64_t seed = 0;
    nlohmann::json extra; // harness-owned settings (pipeline, split, ...)
};

/// "TEVM" container: magic, u32 little-endian JSON header length, JSON header
/// with the model config and tensor manifest, then f32 little-endian payload.
void save_checkpoint(EventDetectorModel<float>& model, const nlohmann::json& extra,
                     const std::filesystem::path& path);
std::unique_ptr<EventDetectorModel<float>> load_checkpoint(const std::filesystem::path& path,
                                                           nlohmann::json* extra_out = nullptr);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// implementation

inline int ModelConfig::input_dim() const {
    switch (variant) {
        case Variant::Hist: return 132;
        case Variant::External: return external_dim;
        case Variant::Conv: return input_height * input_width;
        case Variant::ConvFlow: return input_height * input_width * 3;
    }
    return 0;
}

inline void ModelConfig::validate() const {
    if (hidden <= 0) throw ConfigError("hidden size must be positive");
    if (rnn_layers != 1 && rnn_layers != 2) throw ConfigError("rnn_layers must be 1 or 2");
    if (is_conv()) {
        if (conv_layers != 2 && conv_layers != 3) throw ConfigError("conv_layers must be 2 or 3");
        for (int c : conv_channels)
            if (c <= 0 || c > nn::kernels::kConvBlock * 4) throw ConfigError("conv channel width out of range");
        if (conv_dense <= 0) throw ConfigError("conv_dense must be positive");
        if (input_height < 16 || input_width < 16) throw ConfigError("conv input too small");
    }
    if (variant == Variant::External && external_dim <= 0)
        throw ConfigError("external variant needs a positive feature dimension");
    for (float g : thresholds)
        if (!(g > 0.0f && g < 1.0f)) throw ConfigError("thresholds must lie in (0,1)");
}

template <typename T>
EventDetectorModel<T>::EventDetectorModel(const ModelConfig& config, uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);

    int lstm_in = config_.input_dim();
    if (config_.is_conv()) {
        const int C = config_.input_channels();
        const int H = config_.input_height, W = config_.input_width;
        conv1_.emplace("conv1", 5, C, config_.conv_channels[0]);
        h1c_ = H - 4; w1c_ = W - 4;
        nn::MaxPool2x2<T>::check_input(h1c_, w1c_);
        h1p_ = h1c_ / 2; w1p_ = w1c_ / 2;
        conv2_.emplace("conv2", 5, config_.conv_channels[0], config_.conv_channels[1]);
        h2c_ = h1p_ - 4; w2c_ = w1p_ - 4;
        nn::MaxPool2x2<T>::check_input(h2c_, w2c_);
        h2p_ = h2c_ / 2; w2p_ = w2c_ / 2;
        flatten_dim_ = h2p_ * w2p_ * config_.conv_channels[1];
        if (config_.conv_layers == 3) {
            conv3_.emplace("conv3", 3, config_.conv_channels[1], config_.conv_channels[2]);
            h3c_ = h2p_ - 2; w3c_ = w2p_ - 2;
            // The third stage may land on odd extents; drop the last row or
            // column so pooling keeps its even-extent contract.
            h3e_ = h3c_ & ~1; w3e_ = w3c_ & ~1;
            h3p_ = h3e_ / 2; w3p_ = w3e_ / 2;
            flatten_dim_ = h3p_ * w3p_ * config_.conv_channels[2];
        }
        feat_dense_.emplace("feat_dense", flatten_dim_, config_.conv_dense, nn::Activation::Relu);
        lstm_in = config_.conv_dense;

        conv1_->init(rng);
        conv2_->init(rng);
        if (conv3_) conv3_->init(rng);
        feat_dense_->init(rng);

        conv1_tmp_.assign(static_cast<size_t>(h1c_) * w1c_ * config_.conv_channels[0], T(0));
        conv2_tmp_.assign(static_cast<size_t>(h2c_) * w2c_ * config_.conv_channels[1], T(0));
        if (conv3_) {
            conv3_tmp_.assign(static_cast<size_t>(h3c_) * w3c_ * config_.conv_channels[2], T(0));
            crop_tmp_.assign(static_cast<size_t>(h3e_) * w3e_ * config_.conv_channels[2], T(0));
        }
    }

    lstm1_.emplace("lstm1", lstm_in, config_.hidden);
    lstm1_->init(rng);
    if (config_.rnn_layers == 2) {
        lstm2_.emplace("lstm2", config_.hidden, config_.hidden);
        lstm2_->init(rng);
    }
    head_ = std::make_unique<nn::Dense<T>>("head", config_.hidden, kNumEventClasses, nn::Activation::Sigmoid);
    head_->init(rng);
    lstm_h_tmp_.assign(config_.hidden, T(0));
    ensure_steps(1);
}

template <typename T>
void EventDetectorModel<T>::ensure_steps(int steps) {
    if (steps_ == steps) return;
    steps_ = steps;
    if (config_.is_conv()) {
        pool1_out_.assign(static_cast<size_t>(steps) * h1p_ * w1p_ * config_.conv_channels[0], T(0));
        pool2_out_.assign(static_cast<size_t>(steps) * h2p_ * w2p_ * config_.conv_channels[1], T(0));
        conv1_->set_steps(steps, config_.input_height, config_.input_width);
        conv2_->set_steps(steps, h1p_, w1p_);
        if (conv3_) conv3_->set_steps(steps, h2p_, w2p_);
        pool1_.set_steps(steps, h1c_, w1c_, config_.conv_channels[0]);
        pool2_.set_steps(steps, h2c_, w2c_, config_.conv_channels[1]);
        if (conv3_) {
            crop_out_.assign(static_cast<size_t>(steps) * h3e_ * w3e_ * config_.conv_channels[2], T(0));
            pool3_out_.assign(static_cast<size_t>(steps) * h3p_ * w3p_ * config_.conv_channels[2], T(0));
            pool3_.set_steps(steps, h3e_, w3e_, config_.conv_channels[2]);
        }
        feat_dense_->set_steps(steps);
        q_.assign(static_cast<size_t>(steps) * config_.conv_dense, T(0));
    }
    lstm1_->set_steps(steps);
    if (lstm2_) lstm2_->set_steps(steps);
    head_->set_steps(steps);
    h_last_.assign(static_cast<size_t>(steps) * config_.hidden, T(0));
    p_.assign(static_cast<size_t>(steps) * kNumEventClasses, T(0));
}

template <typename T>
void EventDetectorModel<T>::reset_state() {
    lstm1_->reset_state();
    if (lstm2_) lstm2_->reset_state();
    stream_t_ = 0;
}

template <typename T>
const T* EventDetectorModel<T>::conv_forward_frame(int t, const T* rep) {
    const auto c1 = config_.conv_channels[0];
    const auto c2 = config_.conv_channels[1];

    conv1_->forward_step(t, rep, config_.input_height, config_.input_width, conv1_tmp_.data());
    for (auto& v : conv1_tmp_) v = v > T(0) ? v : T(0);
    T* p1 = &pool1_out_[static_cast<size_t>(t) * h1p_ * w1p_ * c1];
    pool1_.forward_step(t, conv1_tmp_.data(), h1c_, w1c_, c1, p1);

    conv2_->forward_step(t, p1, h1p_, w1p_, conv2_tmp_.data());
    for (auto& v : conv2_tmp_) v = v > T(0) ? v : T(0);
    T* p2 = &pool2_out_[static_cast<size_t>(t) * h2p_ * w2p_ * c2];
    pool2_.forward_step(t, conv2_tmp_.data(), h2c_, w2c_, c2, p2);
    if (!conv3_) return p2;

    const auto c3 = config_.conv_channels[2];
    conv3_->forward_step(t, p2, h2p_, w2p_, conv3_tmp_.data());
    for (auto& v : conv3_tmp_) v = v > T(0) ? v : T(0);
    T* crop = &crop_out_[static_cast<size_t>(t) * h3e_ * w3e_ * c3];
    for (int y = 0; y < h3e_; ++y)
        std::copy(&conv3_tmp_[static_cast<size_t>(y) * w3c_ * c3],
                  &conv3_tmp_[(static_cast<size_t>(y) * w3c_ + w3e_) * c3],
                  crop + static_cast<size_t>(y) * w3e_ * c3);
    T* p3 = &pool3_out_[static_cast<size_t>(t) * h3p_ * w3p_ * c3];
    pool3_.forward_step(t, crop, h3e_, w3e_, c3, p3);
    return p3;
}

template <typename T>
std::array<T, kNumEventClasses> EventDetectorModel<T>::step(const T* rep) {
    ensure_steps(1);
    const T* q = rep;
    std::vector<T> q_buf;
    if (config_.is_conv()) {
        const T* flat = conv_forward_frame(0, rep);
        q_buf.resize(config_.conv_dense);
        feat_dense_->forward_step(0, flat, q_buf.data());
        q = q_buf.data();
    }
    lstm1_->forward_step(0, q, lstm_h_tmp_.data());
    if (lstm2_) lstm2_->forward_step(0, lstm_h_tmp_.data(), lstm_h_tmp_.data());
    std::array<T, kNumEventClasses> out{};
    head_->forward_step(0, lstm_h_tmp_.data(), out.data());
    ++stream_t_;
    return out;
}

template <typename T>
std::vector<std::array<T, kNumEventClasses>> EventDetectorModel<T>::forward_clip(const T* reps, int steps) {
    reset_state();
    std::vector<std::array<T, kNumEventClasses>> scores;
    scores.reserve(static_cast<size_t>(steps));
    for (int t = 0; t < steps; ++t) scores.push_back(step(reps + static_cast<size_t>(t) * input_dim()));
    return scores;
}

template <typename T>
T EventDetectorModel<T>::train_clip(const T* reps, int steps, const LabelSet* labels,
                                    const std::array<T, kNumEventClasses>& loss_weights) {
    ensure_steps(steps);
    reset_state();
    const int in_dim = input_dim();
    const int hid = config_.hidden;

    // Forward: feature stage per frame, then the recurrence.
    if (config_.is_conv()) {
        for (int t = 0; t < steps; ++t) conv_forward_frame(t, reps + static_cast<size_t>(t) * in_dim);
        const std::vector<T>& flat = conv3_ ? pool3_out_ : pool2_out_;
        feat_dense_->forward_batch(steps, flat.data(), q_.data());
    }
    const T* q_all = config_.is_conv() ? q_.data() : reps;
    const int q_dim = config_.is_conv() ? config_.conv_dense : in_dim;
    for (int t = 0; t < steps; ++t) {
        lstm1_->forward_step(t, q_all + static_cast<size_t>(t) * q_dim, nullptr);
        if (lstm2_) lstm2_->forward_step(t, lstm1_->cached_h(t), nullptr);
        const nn::Lstm<T>& top = lstm2_ ? *lstm2_ : *lstm1_;
        head_->forward_step(t, top.cached_h(t), &p_[static_cast<size_t>(t) * kNumEventClasses]);
    }

    // Loss and dL/dp.
    T loss = T(0);
    std::vector<T> dldp(static_cast<size_t>(steps) * kNumEventClasses);
    std::array<T, kNumEventClasses> dldp_row{};
    for (int t = 0; t < steps; ++t) {
        loss += nn::weighted_bce(&p_[static_cast<size_t>(t) * kNumEventClasses], labels[t].flags.data(),
                                 loss_weights.data(), kNumEventClasses, dldp_row.data());
        std::copy(dldp_row.begin(), dldp_row.end(), &dldp[static_cast<size_t>(t) * kNumEventClasses]);
    }

    // Head, then BPTT through the stack.
    for (int t = 0; t < steps; ++t)
        head_->backward_step(t, &dldp[static_cast<size_t>(t) * kNumEventClasses],
                             &h_last_[static_cast<size_t>(t) * hid]);

    std::vector<T> dq(static_cast<size_t>(steps) * q_dim);
    if (lstm2_) {
        std::vector<T> dh1(static_cast<size_t>(steps) * hid);
        lstm2_->begin_backward();
        for (int t = steps - 1; t >= 0; --t) lstm2_->backward_step(t, &h_last_[static_cast<size_t>(t) * hid]);
        lstm2_->finish_backward(steps, dh1.data());
        lstm1_->begin_backward();
        for (int t = steps - 1; t >= 0; --t) lstm1_->backward_step(t, &dh1[static_cast<size_t>(t) * hid]);
        lstm1_->finish_backward(steps, dq.data());
    } else {
        lstm1_->begin_backward();
        for (int t = steps - 1; t >= 0; --t) lstm1_->backward_step(t, &h_last_[static_cast<size_t>(t) * hid]);
        lstm1_->finish_backward(steps, dq.data());
    }

    if (!config_.is_conv()) return loss;

    const auto c1 = config_.conv_channels[0];
    const auto c2 = config_.conv_channels[1];
    const auto c3 = config_.conv_channels[2];
    const size_t flat_sz = static_cast<size_t>(flatten_dim_);
    std::vector<T> dflat(static_cast<size_t>(steps) * flat_sz);
    feat_dense_->backward_batch(steps, dq.data(), dflat.data());

    std::vector<T> dpool_masked(flat_sz);
    std::vector<T> dconv2(static_cast<size_t>(h2c_) * w2c_ * c2);
    std::vector<T> dpool1(static_cast<size_t>(h1p_) * w1p_ * c1);
    std::vector<T> dpool1_masked(dpool1.size());
    std::vector<T> dconv1(static_cast<size_t>(h1c_) * w1c_ * c1);
    std::vector<T> dconv3, dcrop, dpool2_from3;
    if (conv3_) {
        dconv3.resize(static_cast<size_t>(h3c_) * w3c_ * c3);
        dcrop.resize(static_cast<size_t>(h3e_) * w3e_ * c3);
        dpool2_from3.resize(static_cast<size_t>(h2p_) * w2p_ * c2);
    }

    for (int t = 0; t < steps; ++t) {
        const T* dflat_row = &dflat[static_cast<size_t>(t) * flat_sz];
        const T* p2 = &pool2_out_[static_cast<size_t>(t) * h2p_ * w2p_ * c2];
        const T* dpool2_row = dflat_row;
        if (conv3_) {
            const T* p3 = &pool3_out_[static_cast<size_t>(t) * h3p_ * w3p_ * c3];
            dpool_masked.assign(flat_sz, T(0));
            for (size_t i = 0; i < flat_sz; ++i) dpool_masked[i] = p3[i] > T(0) ? dflat_row[i] : T(0);
            pool3_.backward_step(t, dpool_masked.data(), h3p_, w3p_, c3, dcrop.data());
            std::fill(dconv3.begin(), dconv3.end(), T(0));
            for (int y = 0; y < h3e_; ++y)
                std::copy(&dcrop[static_cast<size_t>(y) * w3e_ * c3], &dcrop[(static_cast<size_t>(y) + 1) * w3e_ * c3],
                          &dconv3[static_cast<size_t>(y) * w3c_ * c3]);
            conv3_->backward_step(t, dconv3.data(), h2p_, w2p_, dpool2_from3.data());
            dpool2_row = dpool2_from3.data();
        }

        // d(pool2 out) -> relu mask -> pool -> conv2, then once more down.
        const size_t p2_sz = static_cast<size_t>(h2p_) * w2p_ * c2;
        std::vector<T> dpool2_masked(p2_sz);
        for (size_t i = 0; i < p2_sz; ++i) dpool2_masked[i] = p2[i] > T(0) ? dpool2_row[i] : T(0);
        pool2_.backward_step(t, dpool2_masked.data(), h2p_, w2p_, c2, dconv2.data());
        conv2_->backward_step(t, dconv2.data(), h1p_, w1p_, dpool1.data());

        const T* p1 = &pool1_out_[static_cast<size_t>(t) * h1p_ * w1p_ * c1];
        for (size_t i = 0; i < dpool1.size(); ++i) dpool1_masked[i] = p1[i] > T(0) ? dpool1[i] : T(0);
        pool1_.backward_step(t, dpool1_masked.data(), h1p_, w1p_, c1, dconv1.data());
        conv1_->backward_step(t, dconv1.data(), config_.input_height, config_.input_width, nullptr);
    }
    return loss;
}

template <typename T>
std::vector<nn::Parameter<T>*> EventDetectorModel<T>::parameters() {
    std::vector<nn::Parameter<T>*> out;
    if (conv1_) {
        out.push_back(&conv1_->kernels_param);
        out.push_back(&conv1_->bias);
        out.push_back(&conv2_->kernels_param);
        out.push_back(&conv2_->bias);
        if (conv3_) {
            out.push_back(&conv3_->kernels_param);
            out.push_back(&conv3_->bias);
        }
        out.push_back(&feat_dense_->weight);
        out.push_back(&feat_dense_->bias);
    }
    out.push_back(&lstm1_->wx);
    out.push_back(&lstm1_->wh);
    out.push_back(&lstm1_->b);
    if (lstm2_) {
        out.push_back(&lstm2_->wx);
        out.push_back(&lstm2_->wh);
        out.push_back(&lstm2_->b);
    }
    out.push_back(&head_->weight);
    out.push_back(&head_->bias);
    return out;
}

template <typename T>
size_t EventDetectorModel<T>::parameter_count() {
    size_t n = 0;
    for (auto* p : parameters()) n += p->size();
    return n;
}

} // namespace tev
