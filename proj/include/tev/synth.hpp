#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tev/clip.hpp"

namespace tev {

enum class ScenarioKind { NoEvent, Stationary, Departing, WrongWay, CarCrash };

const char* scenario_name(ScenarioKind k);
ScenarioKind scenario_from_name(const std::string& name);

/// Rendering disturbances, applied in order: noise, brightness drift, fog.
struct Perturbations {
    double noise_sigma = 0.0;      // additive Gaussian, intensity units
    double brightness_drift = 0.0; // intensity per frame
    double fog_contrast = 1.0;     // contrast factor in (0,1]
};

struct ScenarioConfig {
    uint64_t seed = 0;
    ScenarioKind kind = ScenarioKind::NoEvent;
    int n_background_vehicles = 1; // ambient legal traffic, 0..3
    Perturbations perturbations;
};

/// Per-frame kinematic state of one vehicle. Speed is signed along the travel
/// axis; positive is the legal direction.
struct VehicleState {
    double x = 0.0;
    double y = 0.0;
    double speed = 0.0;
    bool present = false;
    int jitter_x = 0;
    int jitter_y = 0;
};

struct VehicleTrack {
    double base_width = 26.0;  // pixels at unit perspective scale
    double base_height = 11.0;
    double intensity = 200.0;  // body fill, 0..255
    std::vector<VehicleState> states; // one per frame
};

/// Perspective proxy: apparent size and speed grow linearly from 0.5 at the
/// top row to 1.5 at the bottom row.
double perspective_scale(double y);

/// Rasterized body rectangle [x0,x1)x[y0,y1), clamped to the frame.
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool empty() const { return x1 <= x0 || y1 <= y0; }
    bool overlaps(const PixelRect& o) const {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }
};
PixelRect vehicle_rect(const VehicleTrack& track, int frame_index);

/// Fully determined rendering input: static background plus vehicle tracks.
struct Scene {
    uint64_t seed = 0;
    std::vector<float> background; // 160x120, row-major
    double background_mean = 0.0;
    std::vector<VehicleTrack> tracks;
    Perturbations perturbations;
};

/// Background texture + vehicle rectangles + noise, drift, fog, in that order.
Frame render_frame(const Scene& scene, int frame_index);

struct SynthClip {
    Clip clip;
    int event_onset_frame = -1;
};

Scene build_scene(const ScenarioConfig& config, int* onset_frame = nullptr,
                  std::vector<int>* target_indices = nullptr);
SynthClip generate_synth_clip(const ScenarioConfig& config);
Clip generate_clip(const ScenarioConfig& config);

/// Road-region template used for wrong-way labeling and as the default mask.
LaneMask default_lane_mask();

/// Clip counts per category.
struct DatasetMix {
    int no_event = 0;
    int stationary = 0;
    int departing = 0;
    int wrong_way = 0;
    int car_crash = 0;

    int total() const { return no_event + stationary + departing + wrong_way + car_crash; }
};

/// The reference mix (281, 111, 56, 131, 16).
DatasetMix default_mix();

/// Scale the reference mix to `total` clips, largest-remainder rounding.
DatasetMix scaled_mix(int total);

using ClipSink = std::function<void(const Clip&, const ClipMeta&, const ScenarioConfig&)>;

/// One clip per requested unit; clip k is seeded with hash(master_seed, k).
void generate_dataset(const DatasetMix& mix, uint64_t master_seed, const ClipSink& sink);

} // namespace tev
