#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tev/gradcheck_suite.hpp"
#include "tev/pipeline.hpp"
#include "tev/pnm.hpp"

namespace {

using namespace tev;

std::array<float, 4> parse_four(const std::string& csv, const char* what) {
    std::array<float, 4> out{};
    std::stringstream ss(csv);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= 4) throw ConfigError(std::string(what) + ": expected 4 comma-separated values");
        out[i++] = std::stof(item);
    }
    if (i != 4) throw ConfigError(std::string(what) + ": expected 4 comma-separated values");
    return out;
}

DatasetMix parse_mix(const std::string& csv) {
    std::array<int, 5> v{};
    std::stringstream ss(csv);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= 5) throw ConfigError("--mix: expected 5 comma-separated counts");
        v[i++] = std::stoi(item);
    }
    if (i != 5) throw ConfigError("--mix: expected 5 comma-separated counts");
    for (int c : v)
        if (c < 0) throw ConfigError("--mix: counts must be >= 0");
    return DatasetMix{v[0], v[1], v[2], v[3], v[4]};
}

struct ModelFlags {
    std::string variant = "hist";
    int conv_layers = 2;
    int rnn_layers = 1;
    int hidden = -1; // -1: default per variant
    int external_dim = 0;

    ModelConfig build() const {
        ModelConfig config;
        config.variant = variant_from_name(variant);
        config.conv_layers = conv_layers;
        config.rnn_layers = rnn_layers;
        config.hidden = hidden > 0 ? hidden : (config.is_conv() ? 128 : 50);
        config.external_dim = external_dim;
        config.validate();
        return config;
    }
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
    cmd->add_option("--model", flags.variant, "Model variant: hist|conv|convflow|external")
        ->check(CLI::IsMember({"hist", "conv", "convflow", "external"}));
    cmd->add_option("--conv-layers", flags.conv_layers, "Convolutional layers (2 or 3)")->check(CLI::IsMember({2, 3}));
    cmd->add_option("--rnn-layers", flags.rnn_layers, "Stacked LSTM layers (1 or 2)")->check(CLI::IsMember({1, 2}));
    cmd->add_option("--hidden", flags.hidden, "LSTM hidden size (default 50; 128 for conv variants)");
    cmd->add_option("--external-dim", flags.external_dim, "Feature length for the external variant");
}

SplitSpec split_from_checkpoint(const nlohmann::json& extra, uint64_t cli_seed, bool seed_given) {
    SplitSpec spec;
    if (extra.contains("split")) {
        const auto& s = extra.at("split");
        spec.seed = s.value("seed", spec.seed);
        spec.train_ratio = s.value("train_ratio", spec.train_ratio);
        spec.val_ratio = s.value("val_ratio", spec.val_ratio);
    }
    if (seed_given) spec.seed = cli_seed;
    return spec;
}

int run(int argc, char** argv) {
    CLI::App app{"Highway traffic event detection: synthetic data, training, evaluation, streaming"};
    app.require_subcommand(1);

    // --- gen ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Generate a labeled synthetic dataset");
    std::string gen_out;
    uint64_t gen_seed = 1;
    int gen_total = -1;
    std::string gen_mix;
    bool gen_quiet = false;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", gen_seed, "Master seed");
    gen->add_option("--total", gen_total, "Scale the reference mix to this many clips");
    gen->add_option("--mix", gen_mix, "Explicit counts: no_event,stationary,departing,wrong_way,car_crash");
    gen->add_flag("--quiet", gen_quiet, "Suppress per-clip output");

    // --- train ---------------------------------------------------------
    auto* tr = app.add_subcommand("train", "Train a detector on the train split");
    std::string tr_data, tr_ckpt;
    ModelFlags tr_model;
    int tr_epochs = 350;
    double tr_lr = 3e-5;
    std::string tr_weights;
    uint64_t tr_seed = 0, tr_split_seed = 42;
    double tr_clip = 0.0;
    tr->add_option("--data", tr_data, "Dataset directory")->required();
    tr->add_option("--ckpt", tr_ckpt, "Checkpoint output path")->required();
    add_model_flags(tr, tr_model);
    tr->add_option("--epochs", tr_epochs, "Training epochs");
    tr->add_option("--lr", tr_lr, "Adam learning rate");
    tr->add_option("--loss-weights", tr_weights, "Positive-class weights w1,w2,w3,w4");
    tr->add_option("--seed", tr_seed, "Init/shuffle seed");
    tr->add_option("--split-seed", tr_split_seed, "Stratified split seed");
    tr->add_option("--grad-clip", tr_clip, "Global gradient-norm clip (0 = off)");

    // --- calibrate -----------------------------------------------------
    auto* cal = app.add_subcommand("calibrate", "Pick per-class thresholds on the validation split");
    std::string cal_data, cal_ckpt, cal_out;
    uint64_t cal_split_seed = 42;
    cal->add_option("--data", cal_data, "Dataset directory")->required();
    cal->add_option("--ckpt", cal_ckpt, "Checkpoint to calibrate")->required();
    cal->add_option("--out", cal_out, "Output checkpoint (default: overwrite input)");
    auto* cal_seed_opt = cal->add_option("--split-seed", cal_split_seed, "Override the split seed");

    // --- eval ----------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "Per-class F1 on the test split");
    std::string ev_data, ev_ckpt, ev_gamma;
    uint64_t ev_split_seed = 42;
    ev->add_option("--data", ev_data, "Dataset directory")->required();
    ev->add_option("--ckpt", ev_ckpt, "Trained checkpoint")->required();
    ev->add_option("--gamma", ev_gamma, "Override thresholds g1,g2,g3,g4");
    auto* ev_seed_opt = ev->add_option("--split-seed", ev_split_seed, "Override the split seed");

    // --- stream --------------------------------------------------------
    auto* st = app.add_subcommand("stream", "Frame-by-frame inference with an event log");
    std::string st_ckpt, st_clip, st_log, st_annotate, st_mask, st_reps;
    bool st_log_all = false;
    st->add_option("--ckpt", st_ckpt, "Trained checkpoint")->required();
    st->add_option("--clip", st_clip, "Input clip (.tevc)")->required();
    st->add_option("--log", st_log, "Event log path (default stdout)");
    st->add_option("--annotate", st_annotate, "Directory for annotated graymap frames");
    st->add_option("--mask", st_mask, "Lane mask (P4/P5) applied before features");
    st->add_option("--reps", st_reps, "Precomputed features (.tevr), external variant");
    st->add_flag("--log-all", st_log_all, "Log every class each frame, not just active ones");

    // --- trace ---------------------------------------------------------
    auto* trc = app.add_subcommand("trace", "Per-frame CSV of scores, decisions, ground truth");
    std::string trc_ckpt, trc_clip, trc_out;
    trc->add_option("--ckpt", trc_ckpt, "Trained checkpoint")->required();
    trc->add_option("--clip", trc_clip, "Labeled clip (.tevc)")->required();
    trc->add_option("--out", trc_out, "CSV path (default stdout)");

    // --- gradcheck -----------------------------------------------------
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference verification of all backward passes");
    int gc_seeds = 20;
    gc->add_option("--seeds", gc_seeds, "Random instantiations per fragment");

    CLI11_PARSE(app, argc, argv);

    if (*gen) {
        DatasetMix mix = default_mix();
        if (!gen_mix.empty())
            mix = parse_mix(gen_mix);
        else if (gen_total > 0)
            mix = scaled_mix(gen_total);
        std::filesystem::create_directories(gen_out);
        int written = 0;
        generate_dataset(mix, gen_seed, [&](const Clip& clip, const ClipMeta& meta, const ScenarioConfig&) {
            const auto base = std::filesystem::path(gen_out) / meta.clip_id;
            save_clip(clip, base.string() + ".tevc");
            save_clip_meta(meta, base.string() + ".json");
            ++written;
            if (!gen_quiet) std::cout << meta.clip_id << "\n";
        });
        std::cout << "wrote " << written << " clips to " << gen_out << "\n";
        return 0;
    }

    if (*tr) {
        TrainConfig config;
        config.model = tr_model.build();
        config.epochs = tr_epochs;
        config.learning_rate = tr_lr;
        config.seed = tr_seed;
        config.grad_clip_norm = tr_clip;
        if (!tr_weights.empty()) config.loss_weights = parse_four(tr_weights, "--loss-weights");
        SplitSpec split_spec;
        split_spec.seed = tr_split_seed;

        const auto entries = scan_dataset(tr_data);
        const Split split = stratified_split(entries, split_spec);
        std::cerr << "dataset: " << entries.size() << " clips; split " << split.train.size() << "/"
                  << split.val.size() << "/" << split.test.size() << "\n";
        PipelineConfig pipeline;
        train(config, split.train, pipeline, split_spec, tr_ckpt, &std::cerr);
        std::cout << "checkpoint written: " << tr_ckpt << "\n";
        return 0;
    }

    if (*cal) {
        nlohmann::json extra;
        auto model = load_checkpoint(cal_ckpt, &extra);
        const SplitSpec spec = split_from_checkpoint(extra, cal_split_seed, cal_seed_opt->count() > 0);
        const PipelineConfig pipeline = pipeline_config_from_json(extra.value("pipeline", nlohmann::json::object()));
        const Split split = stratified_split(scan_dataset(cal_data), spec);
        const auto scored = score_clips(*model, split.val, pipeline);
        const CalibrationResult result = calibrate_thresholds(scored);
        model->mutable_config().thresholds = result.gamma;
        static const char* names[4] = {"stationary", "departing", "wrong_way", "car_crash"};
        for (int i = 0; i < 4; ++i)
            std::cout << names[i] << ": gamma " << result.gamma[i] << "  (validation F1 " << result.val_f1[i]
                      << ")\n";
        save_checkpoint(*model, extra, cal_out.empty() ? cal_ckpt : cal_out);
        return 0;
    }

    if (*ev) {
        nlohmann::json extra;
        auto model = load_checkpoint(ev_ckpt, &extra);
        const SplitSpec spec = split_from_checkpoint(extra, ev_split_seed, ev_seed_opt->count() > 0);
        const PipelineConfig pipeline = pipeline_config_from_json(extra.value("pipeline", nlohmann::json::object()));
        const Split split = stratified_split(scan_dataset(ev_data), spec);
        std::array<float, 4> gamma = model->config().thresholds;
        if (!ev_gamma.empty()) gamma = parse_four(ev_gamma, "--gamma");
        const auto scored = score_clips(*model, split.test, pipeline);
        const F1Report report = evaluate(scored, gamma);
        print_report(report, std::cout);
        return 0;
    }

    if (*st) {
        nlohmann::json extra;
        auto model = load_checkpoint(st_ckpt, &extra);
        const PipelineConfig pipeline = pipeline_config_from_json(extra.value("pipeline", nlohmann::json::object()));
        const Clip clip = load_clip(st_clip);
        StreamOptions options;
        options.log_all = st_log_all;
        if (!st_annotate.empty()) options.annotate_dir = st_annotate;
        if (!st_mask.empty()) options.mask = read_mask(st_mask);
        std::vector<float> external;
        if (!st_reps.empty()) {
            int frames = 0;
            external = load_rep_cache(st_reps, model->config().external_dim, &frames);
            options.external_reps = &external;
        }
        std::ofstream log_file;
        std::ostream* log = &std::cout;
        if (!st_log.empty()) {
            log_file.open(st_log);
            if (!log_file) throw FormatError("cannot open log for writing: " + st_log);
            log = &log_file;
        }
        const StreamStats stats = stream_clip(*model, model->config().thresholds, clip, pipeline, *log, options);
        std::cerr << "streamed " << stats.frames << " frames: mean " << stats.mean_ms << " ms, max "
                  << stats.max_ms << " ms per frame\n";
        return 0;
    }

    if (*trc) {
        nlohmann::json extra;
        auto model = load_checkpoint(trc_ckpt, &extra);
        const PipelineConfig pipeline = pipeline_config_from_json(extra.value("pipeline", nlohmann::json::object()));
        const Clip clip = load_clip(trc_clip);
        const auto reps = clip_representation(trc_clip, clip, model->config().variant, pipeline,
                                              model->config().external_dim);
        std::ofstream out_file;
        std::ostream* out = &std::cout;
        if (!trc_out.empty()) {
            out_file.open(trc_out);
            if (!out_file) throw FormatError("cannot open for writing: " + trc_out);
            out = &out_file;
        }
        export_trace(*model, model->config().thresholds, clip, reps, *out);
        return 0;
    }

    if (*gc) {
        const GradSuiteReport report = run_gradcheck_suite(gc_seeds, &std::cout);
        std::cout << "overall max rel error: " << report.max_rel_error << "\n";
        if (!report.passed()) {
            std::cerr << "gradient check FAILED (tolerance 1e-4)\n";
            return 3;
        }
        return 0;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const tev::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const tev::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
