#include "tev/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

#include "tev/pnm.hpp"
#include "tev/rng.hpp"

namespace tev {

nlohmann::json pipeline_config_to_json(const PipelineConfig& c) {
    return nlohmann::json{
        {"flow",
         {{"pyramid_levels", c.flow.pyramid_levels},
          {"pyramid_scale", c.flow.pyramid_scale},
          {"window_size", c.flow.window_size},
          {"iterations", c.flow.iterations},
          {"poly_n", c.flow.poly_n},
          {"poly_sigma", c.flow.poly_sigma}}},
        {"quantizer", {{"level_thresholds", c.quantizer.level_thresholds}}},
        {"background",
         {{"components", c.background.components},
          {"learning_rate", c.background.learning_rate},
          {"match_threshold", c.background.match_threshold},
          {"background_ratio", c.background.background_ratio},
          {"initial_variance", c.background.initial_variance},
          {"variance_floor", c.background.variance_floor}}},
    };
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    if (j.contains("flow")) {
        const auto& f = j.at("flow");
        c.flow.pyramid_levels = f.value("pyramid_levels", c.flow.pyramid_levels);
        c.flow.pyramid_scale = f.value("pyramid_scale", c.flow.pyramid_scale);
        c.flow.window_size = f.value("window_size", c.flow.window_size);
        c.flow.iterations = f.value("iterations", c.flow.iterations);
        c.flow.poly_n = f.value("poly_n", c.flow.poly_n);
        c.flow.poly_sigma = f.value("poly_sigma", c.flow.poly_sigma);
    }
    if (j.contains("quantizer") && j.at("quantizer").contains("level_thresholds"))
        c.quantizer.level_thresholds = j.at("quantizer").at("level_thresholds").get<std::array<double, 4>>();
    if (j.contains("background")) {
        const auto& b = j.at("background");
        c.background.components = b.value("components", c.background.components);
        c.background.learning_rate = b.value("learning_rate", c.background.learning_rate);
        c.background.match_threshold = b.value("match_threshold", c.background.match_threshold);
        c.background.background_ratio = b.value("background_ratio", c.background.background_ratio);
        c.background.initial_variance = b.value("initial_variance", c.background.initial_variance);
        c.background.variance_floor = b.value("variance_floor", c.background.variance_floor);
    }
    return c;
}

RepresentationPipeline::RepresentationPipeline(Variant variant, const PipelineConfig& config)
    : variant_(variant), config_(config) {
    config_.quantizer.validate();
}

int RepresentationPipeline::dim() const {
    switch (variant_) {
        case Variant::Hist: return kMotionFeatureDim;
        case Variant::Conv: return kFrameHeight * kFrameWidth;
        case Variant::ConvFlow: return kFrameHeight * kFrameWidth * 3;
        case Variant::External: break;
    }
    throw ConfigError("external representations are file-supplied, not computed");
}

void RepresentationPipeline::reset() {
    bg_.reset();
    prev_.reset();
}

std::vector<float> RepresentationPipeline::push(const Frame& frame) {
    switch (variant_) {
        case Variant::Conv: {
            prev_ = frame;
            return build_appearance(frame);
        }
        case Variant::ConvFlow: {
            FlowField flow(frame.width, frame.height);
            if (prev_) flow = estimate_flow(*prev_, frame, config_.flow);
            prev_ = frame;
            return build_appearance_flow(frame, flow);
        }
        case Variant::Hist: {
            FlowField flow(frame.width, frame.height);
            if (prev_) flow = estimate_flow(*prev_, frame, config_.flow);
            prev_ = frame;
            if (!bg_) bg_.emplace(frame, config_.background);
            const ForegroundMask fg = bg_->update(frame);
            const auto vec = motion_feature_vector(flow, fg, config_.quantizer);
            return {vec.begin(), vec.end()};
        }
        case Variant::External: break;
    }
    throw ConfigError("external representations are file-supplied, not computed");
}

namespace {

constexpr char kRepMagic[4] = {'T', 'E', 'V', 'R'};

} // namespace

void save_rep_cache(const std::filesystem::path& path, const std::vector<float>& rows, int frames, int dim) {
    if (rows.size() != static_cast<size_t>(frames) * dim)
        throw MalformedInputError("rep cache size does not match frames x dim");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out.write(kRepMagic, 4);
    const uint16_t version = 1;
    const uint32_t f = static_cast<uint32_t>(frames), d = static_cast<uint32_t>(dim);
    out.write(reinterpret_cast<const char*>(&version), 2);
    out.write(reinterpret_cast<const char*>(&f), 4);
    out.write(reinterpret_cast<const char*>(&d), 4);
    out.write(reinterpret_cast<const char*>(rows.data()), static_cast<std::streamsize>(rows.size() * 4));
}

std::vector<float> load_rep_cache(const std::filesystem::path& path, int expected_dim, int* frames_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kRepMagic, 4) != 0)
        throw FormatError("bad magic in representation cache " + path.string());
    uint16_t version = 0;
    uint32_t frames = 0, dim = 0;
    in.read(reinterpret_cast<char*>(&version), 2);
    in.read(reinterpret_cast<char*>(&frames), 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    if (!in || version != 1) throw FormatError("unsupported representation cache version in " + path.string());
    if (expected_dim > 0 && dim != static_cast<uint32_t>(expected_dim))
        throw FormatError("representation cache " + path.string() + " has dim " + std::to_string(dim) +
                          ", expected " + std::to_string(expected_dim));
    std::vector<float> rows(static_cast<size_t>(frames) * dim);
    in.read(reinterpret_cast<char*>(rows.data()), static_cast<std::streamsize>(rows.size() * 4));
    if (!in) throw FormatError("truncated representation cache " + path.string());
    if (frames_out) *frames_out = static_cast<int>(frames);
    return rows;
}

std::filesystem::path rep_cache_path(const std::filesystem::path& clip_path, Variant variant) {
    std::filesystem::path p = clip_path;
    p.replace_extension(std::string(".") + variant_name(variant) + ".tevr");
    return p;
}

std::vector<float> clip_representation(const std::filesystem::path& clip_path, const Clip& clip, Variant variant,
                                       const PipelineConfig& config, int external_dim) {
    const int steps = static_cast<int>(clip.length());
    if (variant == Variant::External) {
        const auto cache = rep_cache_path(clip_path, variant);
        int frames = 0;
        auto rows = load_rep_cache(cache, external_dim, &frames);
        if (frames != steps)
            throw FormatError("external features " + cache.string() + " cover " + std::to_string(frames) +
                              " frames, clip has " + std::to_string(steps));
        return rows;
    }
    if (variant == Variant::Conv) {
        std::vector<float> rows;
        rows.reserve(static_cast<size_t>(steps) * kFrameHeight * kFrameWidth);
        for (const Frame& f : clip.frames) {
            const auto r = build_appearance(f);
            rows.insert(rows.end(), r.begin(), r.end());
        }
        return rows;
    }

    RepresentationPipeline pipe(variant, config);
    const int dim = pipe.dim();
    const auto cache = rep_cache_path(clip_path, variant);
    if (std::filesystem::exists(cache)) {
        int frames = 0;
        auto rows = load_rep_cache(cache, dim, &frames);
        if (frames == steps) return rows;
    }
    std::vector<float> rows(static_cast<size_t>(steps) * dim);
    if (variant == Variant::Hist) {
        // Flow is the expensive part; compute it for all pairs up front (the
        // fields are identical to the streaming path's), then run the
        // sequential background model.
        const auto fields = flow_for_clip(clip, config.flow);
        std::optional<BackgroundState> bg;
        for (int t = 0; t < steps; ++t) {
            if (!bg) bg.emplace(clip.frames[t], config.background);
            const ForegroundMask fg = bg->update(clip.frames[t]);
            const auto vec = motion_feature_vector(fields[t], fg, config.quantizer);
            std::copy(vec.begin(), vec.end(), rows.begin() + static_cast<size_t>(t) * dim);
        }
    } else {
        pipe.reset();
        for (int t = 0; t < steps; ++t) {
            const auto r = pipe.push(clip.frames[t]);
            std::copy(r.begin(), r.end(), rows.begin() + static_cast<size_t>(t) * dim);
        }
    }
    if (!clip_path.empty()) save_rep_cache(cache, rows, steps, dim);
    return rows;
}

std::vector<DatasetEntry> scan_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
    std::vector<DatasetEntry> entries;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".tevc") continue;
        DatasetEntry entry;
        entry.path = e.path();
        entry.clip_id = e.path().stem().string();
        auto meta_path = e.path();
        meta_path.replace_extension(".json");
        if (auto meta = load_clip_meta(meta_path)) {
            entry.clip_id = meta->clip_id;
            entry.category = meta->scenario_kind;
        } else {
            entry.category = "unknown";
        }
        entries.push_back(std::move(entry));
    }
    std::sort(entries.begin(), entries.end(),
              [](const DatasetEntry& a, const DatasetEntry& b) { return a.path.filename() < b.path.filename(); });
    return entries;
}

Split stratified_split(const std::vector<DatasetEntry>& entries, const SplitSpec& spec) {
    if (spec.train_ratio <= 0.0 || spec.val_ratio < 0.0 || spec.train_ratio + spec.val_ratio > 1.0)
        throw ConfigError("split ratios must be positive and sum to at most 1");

    std::map<std::string, std::vector<DatasetEntry>> by_category;
    for (const auto& e : entries) by_category[e.category].push_back(e);

    Split split;
    Rng rng(spec.seed);
    for (auto& [category, members] : by_category) {
        std::sort(members.begin(), members.end(),
                  [](const DatasetEntry& a, const DatasetEntry& b) { return a.clip_id < b.clip_id; });
        rng.shuffle(members);
        const size_t n = members.size();
        const size_t n_train = static_cast<size_t>(std::floor(spec.train_ratio * static_cast<double>(n)));
        const size_t n_val = static_cast<size_t>(std::floor(spec.val_ratio * static_cast<double>(n)));
        for (size_t i = 0; i < n; ++i) {
            if (i < n_train)
                split.train.push_back(members[i]);
            else if (i < n_train + n_val)
                split.val.push_back(members[i]);
            else
                split.test.push_back(members[i]);
        }
    }
    return split;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
    for (float w : loss_weights)
        if (w <= 0.0f) throw ConfigError("loss weights must be positive");
    model.validate();
}

namespace {

struct TrainClipData {
    std::string clip_id;
    std::vector<LabelSet> labels;
    std::vector<float> reps;   // all variants except conv
    std::vector<Frame> frames; // conv only
};

void appearance_rows(const std::vector<Frame>& frames, std::vector<float>& out) {
    const size_t per = frames.empty() ? 0 : frames[0].size();
    out.resize(frames.size() * per);
#pragma omp parallel for schedule(static)
    for (size_t t = 0; t < frames.size(); ++t) {
        const auto& px = frames[t].pixels;
        float* row = &out[t * per];
        for (size_t i = 0; i < per; ++i) row[i] = px[i] * (1.0f / 255.0f);
    }
}

double grad_norm(const std::vector<nn::Parameter<float>*>& params) {
    double sum = 0.0;
    for (auto* p : params)
        for (float g : p->grad.values) sum += static_cast<double>(g) * g;
    return std::sqrt(sum);
}

} // namespace

TrainResult train(const TrainConfig& config, const std::vector<DatasetEntry>& train_clips,
                  const PipelineConfig& pipeline, const SplitSpec& split_used,
                  const std::filesystem::path& checkpoint_path, std::ostream* log) {
    config.validate();
    if (train_clips.empty()) throw ConfigError("training set is empty");

    const Variant variant = config.model.variant;
    std::vector<TrainClipData> data;
    data.reserve(train_clips.size());
    for (const auto& entry : train_clips) {
        Clip clip = load_clip(entry.path);
        TrainClipData d;
        d.clip_id = entry.clip_id;
        d.labels = clip.labels;
        if (variant == Variant::Conv)
            d.frames = std::move(clip.frames);
        else
            d.reps = clip_representation(entry.path, clip, variant, pipeline, config.model.external_dim);
        data.push_back(std::move(d));
    }

    EventDetectorModel<float> model(config.model, config.seed);
    nn::AdamConfig adam_cfg;
    adam_cfg.learning_rate = config.learning_rate;
    auto params = model.parameters();
    nn::Adam<float> adam(params, adam_cfg);

    TrainResult result;
    std::vector<float> conv_scratch;
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(hash_seed(config.seed, 1000 + static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (size_t idx : order) {
            TrainClipData& d = data[idx];
            const float* reps = nullptr;
            int steps = 0;
            if (variant == Variant::Conv) {
                appearance_rows(d.frames, conv_scratch);
                reps = conv_scratch.data();
                steps = static_cast<int>(d.frames.size());
            } else {
                reps = d.reps.data();
                steps = static_cast<int>(d.labels.size());
            }
            adam.zero_grad();
            const float loss = model.train_clip(reps, steps, d.labels.data(), config.loss_weights);
            if (!std::isfinite(loss))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", clip " + d.clip_id +
                                   ": " + std::to_string(loss));
            if (config.grad_clip_norm > 0.0) {
                const double norm = grad_norm(params);
                if (norm > config.grad_clip_norm) {
                    const float scale = static_cast<float>(config.grad_clip_norm / norm);
                    for (auto* p : params)
                        for (float& g : p->grad.values) g *= scale;
                }
            }
            adam.step();
            loss_sum += loss;
        }
        const double mean = loss_sum / static_cast<double>(data.size());
        result.epoch_mean_loss.push_back(mean);
        if (log) (*log) << "epoch " << (epoch + 1) << "/" << config.epochs << "  mean clip loss " << mean << "\n";
    }

    nlohmann::json extra{
        {"pipeline", pipeline_config_to_json(pipeline)},
        {"split", {{"seed", split_used.seed}, {"train_ratio", split_used.train_ratio}, {"val_ratio", split_used.val_ratio}}},
        {"train",
         {{"epochs", config.epochs},
          {"learning_rate", config.learning_rate},
          {"loss_weights", config.loss_weights},
          {"seed", config.seed},
          {"grad_clip_norm", config.grad_clip_norm}}},
    };
    save_checkpoint(model, extra, checkpoint_path);
    return result;
}

std::vector<ScoredClip> score_clips(EventDetectorModel<float>& model, const std::vector<DatasetEntry>& entries,
                                    const PipelineConfig& pipeline) {
    std::vector<ScoredClip> out;
    out.reserve(entries.size());
    for (const auto& entry : entries) {
        const Clip clip = load_clip(entry.path);
        const auto reps = clip_representation(entry.path, clip, model.config().variant, pipeline,
                                              model.config().external_dim);
        ScoredClip sc;
        sc.clip_id = entry.clip_id;
        sc.scores = model.forward_clip(reps.data(), static_cast<int>(clip.length()));
        sc.labels = clip.labels;
        out.push_back(std::move(sc));
    }
    return out;
}

std::vector<float> gamma_grid() {
    std::vector<float> grid;
    for (int k = 0;; ++k) {
        const double g = kGammaGridStart + kGammaGridStep * k;
        if (g > kGammaGridEnd + 1e-9) break;
        grid.push_back(static_cast<float>(g));
    }
    return grid;
}

double f1_at_threshold(const std::vector<ScoredClip>& scored, int cls, float gamma) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (const auto& sc : scored)
        for (size_t t = 0; t < sc.scores.size(); ++t) {
            const bool pred = sc.scores[t][cls] >= gamma;
            const bool truth = sc.labels[t].flags[cls];
            if (pred && truth) ++tp;
            else if (pred && !truth) ++fp;
            else if (!pred && truth) ++fn;
        }
    const int64_t denom = 2 * tp + fp + fn;
    return denom > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 1.0;
}

CalibrationResult calibrate_thresholds(const std::vector<ScoredClip>& validation) {
    if (validation.empty()) throw ConfigError("validation set is empty");
    CalibrationResult result;
    const auto grid = gamma_grid();
    for (int cls = 0; cls < kNumEventClasses; ++cls) {
        float best_gamma = grid.front();
        double best_f1 = -1.0;
        for (float g : grid) {
            const double f1 = f1_at_threshold(validation, cls, g);
            if (f1 > best_f1) {
                best_f1 = f1;
                best_gamma = g;
            }
        }
        result.gamma[cls] = best_gamma;
        result.val_f1[cls] = best_f1;
    }
    return result;
}

F1Report evaluate(const std::vector<ScoredClip>& test, const std::array<float, kNumEventClasses>& gamma) {
    if (test.empty()) throw ConfigError("test set is empty");
    F1Report report;
    report.gamma = gamma;
    double macro = 0.0;
    for (int cls = 0; cls < kNumEventClasses; ++cls) {
        ClassStats& s = report.per_class[cls];
        for (const auto& sc : test)
            for (size_t t = 0; t < sc.scores.size(); ++t) {
                const bool pred = sc.scores[t][cls] >= gamma[cls];
                const bool truth = sc.labels[t].flags[cls];
                if (pred && truth) ++s.tp;
                else if (pred && !truth) ++s.fp;
                else if (!pred && truth) ++s.fn;
            }
        s.precision = (s.tp + s.fp) > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 1.0;
        s.recall = (s.tp + s.fn) > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 1.0;
        const int64_t denom = 2 * s.tp + s.fp + s.fn;
        s.f1 = denom > 0 ? 2.0 * static_cast<double>(s.tp) / static_cast<double>(denom) : 1.0;
        macro += s.f1;
    }
    report.macro_f1 = macro / kNumEventClasses;
    return report;
}

void print_report(const F1Report& report, std::ostream& out) {
    static const char* names[kNumEventClasses] = {"stationary", "departing", "wrong_way", "car_crash"};
    char buf[160];
    out << "class         gamma      TP      FP      FN   precision  recall      F1\n";
    for (int cls = 0; cls < kNumEventClasses; ++cls) {
        const ClassStats& s = report.per_class[cls];
        std::snprintf(buf, sizeof(buf), "%-12s  %0.2f  %6lld  %6lld  %6lld      %0.4f  %0.4f  %0.4f\n", names[cls],
                      report.gamma[cls], static_cast<long long>(s.tp), static_cast<long long>(s.fp),
                      static_cast<long long>(s.fn), s.precision, s.recall, s.f1);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "macro-F1  %0.4f\n", report.macro_f1);
    out << buf;
}

StreamStats stream_clip(EventDetectorModel<float>& model, const std::array<float, kNumEventClasses>& gamma,
                        const Clip& clip, const PipelineConfig& pipeline, std::ostream& log_out,
                        const StreamOptions& options) {
    static const char* names[kNumEventClasses] = {"stationary", "departing", "wrong_way", "car_crash"};
    const Variant variant = model.config().variant;
    std::optional<RepresentationPipeline> pipe;
    if (variant != Variant::External) pipe.emplace(variant, pipeline);
    else if (!options.external_reps)
        throw ConfigError("streaming an external-variant checkpoint needs precomputed features");

    if (!options.annotate_dir.empty()) std::filesystem::create_directories(options.annotate_dir);
    model.reset_state();
    if (pipe) pipe->reset();

    StreamStats stats;
    double total_ms = 0.0;
    for (size_t t = 0; t < clip.length(); ++t) {
        const auto start = std::chrono::steady_clock::now();
        Frame frame = clip.frames[t];
        if (options.mask) frame = apply_mask(frame, *options.mask);
        std::vector<float> rep;
        const float* rep_ptr = nullptr;
        if (pipe) {
            rep = pipe->push(frame);
            rep_ptr = rep.data();
        } else {
            rep_ptr = options.external_reps->data() + t * static_cast<size_t>(model.input_dim());
        }
        const auto scores = model.step(rep_ptr);
        const EventDecision decision = decide(scores, gamma);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        total_ms += ms;
        stats.max_ms = std::max(stats.max_ms, ms);
        ++stats.frames;

        std::string active;
        for (int cls = 0; cls < kNumEventClasses; ++cls) {
            if (!decision.y[cls] && !options.log_all) continue;
            nlohmann::ordered_json record{
                {"clip", clip.clip_id}, {"frame", t},           {"event", names[cls]},
                {"p", scores[cls]},     {"y", decision.y[cls]}, {"gamma", gamma[cls]},
            };
            log_out << record.dump() << "\n";
            if (decision.y[cls]) {
                if (!active.empty()) active += ' ';
                active += names[cls];
            }
        }
        if (!options.annotate_dir.empty()) {
            Frame annotated = clip.frames[t];
            draw_banner(annotated, active.empty() ? "no event" : active);
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%04zu.pgm", clip.clip_id.c_str(), t);
            write_pgm(annotated, options.annotate_dir / name);
        }
    }
    stats.mean_ms = stats.frames > 0 ? total_ms / stats.frames : 0.0;
    return stats;
}

void export_trace(EventDetectorModel<float>& model, const std::array<float, kNumEventClasses>& gamma,
                  const Clip& clip, const std::vector<float>& reps, std::ostream& out) {
    const auto scores = model.forward_clip(reps.data(), static_cast<int>(clip.length()));
    char buf[256];
    for (size_t t = 0; t < scores.size(); ++t) {
        const EventDecision d = decide(scores[t], gamma);
        const LabelSet& gt = clip.labels[t];
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f,%d,%d,%d,%d,%d,%d,%d,%d\n", t, scores[t][0],
                      scores[t][1], scores[t][2], scores[t][3], d.y[0] ? 1 : 0, d.y[1] ? 1 : 0, d.y[2] ? 1 : 0,
                      d.y[3] ? 1 : 0, gt.flags[0] ? 1 : 0, gt.flags[1] ? 1 : 0, gt.flags[2] ? 1 : 0,
                      gt.flags[3] ? 1 : 0);
        out << buf;
    }
}

} // namespace tev
