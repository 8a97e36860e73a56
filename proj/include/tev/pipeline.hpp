#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tev/features.hpp"
#include "tev/model.hpp"
#include "tev/synth.hpp"

namespace tev {

/// Everything the frame-to-representation path needs; travels inside
/// checkpoints so streaming uses the training-time settings.
struct PipelineConfig {
    FlowParams flow;
    QuantizerConfig quantizer;
    BgParams background;
};

nlohmann::json pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

/// Stateful frame-to-r_t converter; one instance per clip or stream. The
/// whole-clip and frame-by-frame paths share this code, so their outputs are
/// bit-identical.
class RepresentationPipeline {
public:
    RepresentationPipeline(Variant variant, const PipelineConfig& config);

    int dim() const;
    void reset();
    std::vector<float> push(const Frame& frame);

private:
    Variant variant_;
    PipelineConfig config_;
    std::optional<BackgroundState> bg_;
    std::optional<Frame> prev_;
};

/// "TEVR" representation cache: magic, u16 version, u32 frames, u32 dim,
/// then frames x dim float32 little-endian rows. Also the hand-off format
/// for externally computed feature vectors.
void save_rep_cache(const std::filesystem::path& path, const std::vector<float>& rows, int frames, int dim);
std::vector<float> load_rep_cache(const std::filesystem::path& path, int expected_dim, int* frames_out);

std::filesystem::path rep_cache_path(const std::filesystem::path& clip_path, Variant variant);

/// Compute (or load from cache) the per-frame representation rows of a clip.
/// hist/convflow results are cached beside the clip; conv is recomputed on
/// the fly; external must already exist as a cache file.
std::vector<float> clip_representation(const std::filesystem::path& clip_path, const Clip& clip, Variant variant,
                                       const PipelineConfig& config, int external_dim);

struct DatasetEntry {
    std::filesystem::path path;
    std::string clip_id;
    std::string category;
};

std::vector<DatasetEntry> scan_dataset(const std::filesystem::path& dir);

struct SplitSpec {
    double train_ratio = 0.70;
    double val_ratio = 0.20; // test gets the remainder
    uint64_t seed = 42;
};

struct Split {
    std::vector<DatasetEntry> train, val, test;
};

/// Per category: seeded shuffle, floor(train n) / floor(val n) / remainder.
Split stratified_split(const std::vector<DatasetEntry>& entries, const SplitSpec& spec);

struct TrainConfig {
    int epochs = 350;
    double learning_rate = 3e-5;
    std::array<float, kNumEventClasses> loss_weights{10.0f, 40.0f, 30.0f, 100.0f};
    uint64_t seed = 0;
    double grad_clip_norm = 0.0; // 0 disables clipping
    ModelConfig model;

    void validate() const;
};

struct TrainResult {
    std::vector<double> epoch_mean_loss;
};

/// Per epoch: seeded clip shuffle; per clip: state reset, full forward,
/// summed loss, BPTT, one Adam step. Writes the checkpoint when done.
TrainResult train(const TrainConfig& config, const std::vector<DatasetEntry>& train_clips,
                  const PipelineConfig& pipeline, const SplitSpec& split_used,
                  const std::filesystem::path& checkpoint_path, std::ostream* log);

/// Scores plus ground truth for one clip.
struct ScoredClip {
    std::string clip_id;
    std::vector<std::array<float, kNumEventClasses>> scores;
    std::vector<LabelSet> labels;
};

std::vector<ScoredClip> score_clips(EventDetectorModel<float>& model, const std::vector<DatasetEntry>& entries,
                                    const PipelineConfig& pipeline);

inline constexpr double kGammaGridStart = 0.10;
inline constexpr double kGammaGridEnd = 0.90;
inline constexpr double kGammaGridStep = 0.05;

std::vector<float> gamma_grid();

/// Frame-level F1 of one class at one threshold; 1.0 when 2TP+FP+FN = 0.
double f1_at_threshold(const std::vector<ScoredClip>& scored, int cls, float gamma);

struct CalibrationResult {
    std::array<float, kNumEventClasses> gamma{};
    std::array<double, kNumEventClasses> val_f1{};
};

/// Independent per-class grid argmax; ties go to the smallest gamma.
CalibrationResult calibrate_thresholds(const std::vector<ScoredClip>& validation);

struct ClassStats {
    int64_t tp = 0, fp = 0, fn = 0;
    double precision = 1.0, recall = 1.0, f1 = 1.0;
};

struct F1Report {
    std::array<ClassStats, kNumEventClasses> per_class{};
    double macro_f1 = 0.0;
    std::array<float, kNumEventClasses> gamma{};
};

F1Report evaluate(const std::vector<ScoredClip>& test, const std::array<float, kNumEventClasses>& gamma);

void print_report(const F1Report& report, std::ostream& out);

struct StreamOptions {
    bool log_all = false;                       // log every class each frame
    std::filesystem::path annotate_dir;         // empty = no annotated frames
    std::optional<LaneMask> mask;               // applied before features
    const std::vector<float>* external_reps = nullptr; // external variant only
};

struct StreamStats {
    int frames = 0;
    double mean_ms = 0.0;
    double max_ms = 0.0;
};

/// Per frame: representation, model step, decisions, JSON-lines records.
StreamStats stream_clip(EventDetectorModel<float>& model, const std::array<float, kNumEventClasses>& gamma,
                        const Clip& clip, const PipelineConfig& pipeline, std::ostream& log_out,
                        const StreamOptions& options);

/// CSV rows: frame index, 4 scores, 4 decisions, 4 ground-truth flags.
void export_trace(EventDetectorModel<float>& model, const std::array<float, kNumEventClasses>& gamma,
                  const Clip& clip, const std::vector<float>& reps, std::ostream& out);

} // namespace tev
