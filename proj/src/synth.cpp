#include "tev/synth.hpp"

#include <algorithm>
#include <cmath>

#include "tev/rng.hpp"

namespace tev {

namespace {

// Road layout at 160x120. Travel axis is x; legal direction is +x.
constexpr int kRoadTop = 24;
constexpr int kRoadBottom = 104; // exclusive
constexpr double kLaneY[2] = {40.0, 62.0}; // main lanes
constexpr double kShoulderY = 88.0;        // emergency lane
constexpr double kNullSpeed = 0.1;

double lane_cruise(Rng& rng, double y) { return rng.uniform(2.0, 8.0) * perspective_scale(y); }

std::vector<float> make_background(uint64_t seed) {
    Rng rng(hash_seed(seed, 11));
    std::vector<float> tex(static_cast<size_t>(kFrameWidth) * kFrameHeight);
    const int dash_phase = static_cast<int>(rng.uniform_int(0, 11));
    for (int y = 0; y < kFrameHeight; ++y) {
        for (int x = 0; x < kFrameWidth; ++x) {
            double v;
            const bool on_road = y >= kRoadTop && y < kRoadBottom;
            if (on_road) {
                v = 78.0 + 0.22 * y;
                const bool dash = ((x + dash_phase) / 12) % 2 == 0;
                if ((y == 50 || y == 51) && dash) v += 55.0;
                if ((y == 72 || y == 73) && dash) v += 55.0;
                if (y == kRoadTop || y == kRoadTop + 1) v += 55.0;       // edge line
                if (y == kRoadBottom - 2 || y == kRoadBottom - 1) v += 55.0;
                if (y == 80 || y == 81) v += 40.0;                       // shoulder line
            } else {
                v = 52.0 + 0.10 * y;
            }
            v += rng.uniform(-7.0, 7.0); // static speckle; gives flow some texture
            tex[static_cast<size_t>(y) * kFrameWidth + x] = static_cast<float>(v);
        }
    }
    return tex;
}

VehicleTrack make_vehicle(Rng& rng, double y) {
    VehicleTrack t;
    t.base_width = rng.uniform(22.0, 30.0);
    t.base_height = rng.uniform(9.0, 13.0);
    t.intensity = rng.uniform() < 0.5 ? rng.uniform(170.0, 225.0) : rng.uniform(20.0, 60.0);
    t.states.assign(kClipFrames, VehicleState{});
    for (auto& s : t.states) s.y = y;
    return t;
}

void mark_presence(VehicleTrack& t) {
    const double margin = t.base_width * perspective_scale(t.states[0].y);
    for (auto& s : t.states) s.present = s.x > -margin && s.x < kFrameWidth + margin;
}

// Constant-speed pass through the view; legal direction.
VehicleTrack cruising_vehicle(Rng& rng, double y, double x_at_0, double speed) {
    VehicleTrack t = make_vehicle(rng, y);
    for (int f = 0; f < kClipFrames; ++f) {
        t.states[f].x = x_at_0 + speed * f;
        t.states[f].speed = speed;
    }
    mark_presence(t);
    return t;
}

std::vector<VehicleTrack> background_traffic(Rng& rng, int count, const std::vector<double>& lanes) {
    std::vector<VehicleTrack> tracks;
    for (int i = 0; i < count; ++i) {
        const double y = lanes[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(lanes.size()) - 1))];
        const double v = lane_cruise(rng, y);
        const double x0 = rng.uniform(-500.0, static_cast<double>(kFrameWidth));
        tracks.push_back(cruising_vehicle(rng, y, x0, v));
    }
    return tracks;
}

struct LabeledScene {
    Scene scene;
    std::vector<LabelSet> labels;
    int onset = -1;
};

LabeledScene build_impl(const ScenarioConfig& config) {
    Rng rng(config.seed);
    LabeledScene out;
    out.scene.seed = config.seed;
    out.scene.background = make_background(config.seed);
    double mean = 0.0;
    for (float v : out.scene.background) mean += v;
    out.scene.background_mean = mean / static_cast<double>(out.scene.background.size());
    out.scene.perturbations = config.perturbations;
    out.labels.assign(kClipFrames, LabelSet{});

    const int onset = config.kind == ScenarioKind::NoEvent ? -1 : static_cast<int>(rng.uniform_int(10, 110));
    out.onset = onset;

    std::vector<double> bg_lanes{kLaneY[0], kLaneY[1]};
    auto& tracks = out.scene.tracks;

    switch (config.kind) {
        case ScenarioKind::NoEvent:
            break;
        case ScenarioKind::Stationary: {
            // Arrives along the shoulder, brakes, and stays put.
            VehicleTrack t = make_vehicle(rng, kShoulderY);
            const double cruise = lane_cruise(rng, kShoulderY);
            const int decel = static_cast<int>(rng.uniform_int(10, 20));
            const double stop_x = rng.uniform(40.0, 120.0);
            for (int f = 0; f < kClipFrames; ++f) {
                if (f >= onset)
                    t.states[f].speed = 0.0;
                else if (f >= onset - decel)
                    t.states[f].speed = cruise * static_cast<double>(onset - f) / decel;
                else
                    t.states[f].speed = cruise;
            }
            t.states[onset].x = stop_x;
            for (int f = onset - 1; f >= 0; --f) t.states[f].x = t.states[f + 1].x - t.states[f + 1].speed;
            for (int f = onset + 1; f < kClipFrames; ++f) t.states[f].x = stop_x;
            mark_presence(t);
            int start = -1;
            for (int f = 0; f < kClipFrames; ++f)
                if (t.states[f].present && std::abs(t.states[f].speed) < kNullSpeed) { start = f; break; }
            for (int f = std::max(start, 0); f < kClipFrames && start >= 0; ++f)
                out.labels[f][EventClass::Stationary] = true;
            tracks.push_back(std::move(t));
            break;
        }
        case ScenarioKind::Departing: {
            // Parked on the shoulder from the first frame, pulls away at onset.
            VehicleTrack t = make_vehicle(rng, kShoulderY);
            const double cruise = lane_cruise(rng, kShoulderY);
            const int accel = static_cast<int>(rng.uniform_int(10, 20));
            const double start_x = rng.uniform(30.0, 110.0);
            for (int f = 0; f < kClipFrames; ++f) {
                if (f <= onset)
                    t.states[f].speed = 0.0;
                else if (f <= onset + accel)
                    t.states[f].speed = cruise * static_cast<double>(f - onset) / accel;
                else
                    t.states[f].speed = cruise;
            }
            t.states[0].x = start_x;
            for (int f = 1; f < kClipFrames; ++f) t.states[f].x = t.states[f - 1].x + t.states[f].speed;
            mark_presence(t);
            for (int f = 0; f < kClipFrames; ++f)
                if (t.states[f].speed > kNullSpeed && t.states[f].speed < cruise)
                    out.labels[f][EventClass::Departing] = true;
            tracks.push_back(std::move(t));
            break;
        }
        case ScenarioKind::WrongWay: {
            const double y = kLaneY[rng.uniform_int(0, 1)];
            bg_lanes = {y == kLaneY[0] ? kLaneY[1] : kLaneY[0]};
            VehicleTrack t = make_vehicle(rng, y);
            const double v = lane_cruise(rng, y);
            const double w_px = std::max(2.0, std::round(t.base_width * perspective_scale(y)));
            const double x_at_onset = kFrameWidth + w_px / 2.0 - 1.0;
            for (int f = 0; f < kClipFrames; ++f) {
                t.states[f].x = x_at_onset + v * (onset - f);
                t.states[f].speed = -v;
            }
            mark_presence(t);
            tracks.push_back(std::move(t));
            const LaneMask mask = default_lane_mask();
            for (int f = 0; f < kClipFrames; ++f) {
                if (!tracks.back().states[f].present) continue;
                const PixelRect r = vehicle_rect(tracks.back(), f);
                bool hits = false;
                for (int yy = r.y0; yy < r.y1 && !hits; ++yy)
                    for (int xx = r.x0; xx < r.x1 && !hits; ++xx)
                        if (mask.at(xx, yy)) hits = true;
                if (hits) out.labels[f][EventClass::WrongWay] = true;
            }
            break;
        }
        case ScenarioKind::CarCrash: {
            // Rear-end collision in a main lane: slow leader, fast chaser.
            const double y = kLaneY[rng.uniform_int(0, 1)];
            bg_lanes = {y == kLaneY[0] ? kLaneY[1] : kLaneY[0]};
            const double scale = perspective_scale(y);
            const double u_lead = rng.uniform(2.0, 2.4);
            const double u_chase = u_lead + rng.uniform(5.4, 5.6);
            const double v_lead = u_lead * scale;
            const double v_chase = u_chase * scale;
            const double impact_x = rng.uniform(50.0, 120.0);

            VehicleTrack lead = make_vehicle(rng, y);
            VehicleTrack chase = make_vehicle(rng, y);
            const double w_lead = std::max(2.0, std::round(lead.base_width * scale));
            const double w_chase = std::max(2.0, std::round(chase.base_width * scale));
            const double chase_impact_x = impact_x - (w_lead + w_chase) / 2.0 + 3.0;

            // Shared post-impact jitter so the wreck moves as one unit.
            const int jx[2] = {static_cast<int>(rng.uniform_int(-1, 1)), static_cast<int>(rng.uniform_int(-1, 1))};
            const int jy[2] = {static_cast<int>(rng.uniform_int(-1, 1)), static_cast<int>(rng.uniform_int(-1, 1))};

            for (int f = 0; f < kClipFrames; ++f) {
                if (f <= onset) {
                    lead.states[f].x = impact_x - v_lead * (onset - f);
                    lead.states[f].speed = f == onset ? 0.0 : v_lead;
                    chase.states[f].x = chase_impact_x - v_chase * (onset - f);
                    chase.states[f].speed = f == onset ? 0.0 : v_chase;
                } else {
                    lead.states[f].x = impact_x;
                    chase.states[f].x = chase_impact_x;
                }
                if (f == onset || f == onset + 1) {
                    const int k = f - onset;
                    lead.states[f].jitter_x = chase.states[f].jitter_x = jx[k];
                    lead.states[f].jitter_y = chase.states[f].jitter_y = jy[k];
                }
            }
            mark_presence(lead);
            mark_presence(chase);
            tracks.push_back(std::move(lead));
            tracks.push_back(std::move(chase));
            int first_overlap = -1;
            for (int f = 0; f < kClipFrames && first_overlap < 0; ++f) {
                if (!tracks[0].states[f].present || !tracks[1].states[f].present) continue;
                if (vehicle_rect(tracks[0], f).overlaps(vehicle_rect(tracks[1], f))) first_overlap = f;
            }
            for (int f = std::max(first_overlap, 0); f < kClipFrames && first_overlap >= 0; ++f)
                out.labels[f][EventClass::CarCrash] = true;
            break;
        }
    }

    auto ambient = background_traffic(rng, config.n_background_vehicles, bg_lanes);
    for (auto& t : ambient) tracks.push_back(std::move(t));
    return out;
}

} // namespace

const char* scenario_name(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::NoEvent: return "no_event";
        case ScenarioKind::Stationary: return "stationary";
        case ScenarioKind::Departing: return "departing";
        case ScenarioKind::WrongWay: return "wrong_way";
        case ScenarioKind::CarCrash: return "car_crash";
    }
    return "?";
}

ScenarioKind scenario_from_name(const std::string& name) {
    for (ScenarioKind k : {ScenarioKind::NoEvent, ScenarioKind::Stationary, ScenarioKind::Departing,
                           ScenarioKind::WrongWay, ScenarioKind::CarCrash})
        if (name == scenario_name(k)) return k;
    throw ConfigError("unknown scenario kind: " + name);
}

double perspective_scale(double y) { return 0.5 + y / (kFrameHeight - 1.0); }

PixelRect vehicle_rect(const VehicleTrack& track, int frame_index) {
    const VehicleState& s = track.states[frame_index];
    const double scale = perspective_scale(s.y);
    const int w = std::max(2, static_cast<int>(std::lround(track.base_width * scale)));
    const int h = std::max(2, static_cast<int>(std::lround(track.base_height * scale)));
    PixelRect r;
    r.x0 = static_cast<int>(std::lround(s.x - w / 2.0)) + s.jitter_x;
    r.y0 = static_cast<int>(std::lround(s.y - h / 2.0)) + s.jitter_y;
    r.x1 = r.x0 + w;
    r.y1 = r.y0 + h;
    r.x0 = std::clamp(r.x0, 0, kFrameWidth);
    r.x1 = std::clamp(r.x1, 0, kFrameWidth);
    r.y0 = std::clamp(r.y0, 0, kFrameHeight);
    r.y1 = std::clamp(r.y1, 0, kFrameHeight);
    return r;
}

Frame render_frame(const Scene& scene, int frame_index) {
    std::vector<float> px = scene.background;

    for (const auto& track : scene.tracks) {
        const VehicleState& s = track.states[frame_index];
        if (!s.present) continue;
        const PixelRect r = vehicle_rect(track, frame_index);
        if (r.empty()) continue;
        const int w = r.x1 - r.x0;
        const int h = r.y1 - r.y0;
        for (int y = r.y0; y < r.y1; ++y) {
            const double rel_y = h > 1 ? static_cast<double>(y - r.y0) / (h - 1) : 0.0;
            for (int x = r.x0; x < r.x1; ++x) {
                const double rel_x = w > 1 ? static_cast<double>(x - r.x0) / (w - 1) : 0.0;
                double v = track.intensity + 24.0 * (rel_x - 0.5);
                if (rel_y >= 0.2 && rel_y < 0.5) v -= 30.0; // window band
                px[static_cast<size_t>(y) * kFrameWidth + x] = static_cast<float>(v);
            }
        }
    }

    const Perturbations& pert = scene.perturbations;
    if (pert.noise_sigma > 0.0) {
        Rng noise(hash_seed(scene.seed, 7000 + static_cast<uint64_t>(frame_index)));
        for (auto& v : px) v = static_cast<float>(v + pert.noise_sigma * noise.normal());
    }
    if (pert.brightness_drift != 0.0)
        for (auto& v : px) v = static_cast<float>(v + pert.brightness_drift * frame_index);
    if (pert.fog_contrast != 1.0)
        for (auto& v : px)
            v = static_cast<float>(scene.background_mean + pert.fog_contrast * (v - scene.background_mean));

    Frame out(kFrameWidth, kFrameHeight);
    for (size_t i = 0; i < px.size(); ++i)
        out.pixels[i] = static_cast<uint8_t>(std::clamp(std::lround(px[i]), 0L, 255L));
    return out;
}

Scene build_scene(const ScenarioConfig& config, int* onset_frame, std::vector<int>* target_indices) {
    auto labeled = build_impl(config);
    if (onset_frame) *onset_frame = labeled.onset;
    if (target_indices) {
        target_indices->clear();
        const int n_targets = static_cast<int>(labeled.scene.tracks.size()) - config.n_background_vehicles;
        for (int i = 0; i < n_targets; ++i) target_indices->push_back(i);
    }
    return std::move(labeled.scene);
}

SynthClip generate_synth_clip(const ScenarioConfig& config) {
    auto labeled = build_impl(config);
    SynthClip out;
    out.event_onset_frame = labeled.onset;
    out.clip.frame_rate = kClipFps;
    out.clip.clip_id = std::string(scenario_name(config.kind)) + "_" + std::to_string(config.seed);
    out.clip.provenance = "synthetic:" + std::to_string(config.seed);
    out.clip.labels = std::move(labeled.labels);
    out.clip.frames.reserve(kClipFrames);
    for (int f = 0; f < kClipFrames; ++f) out.clip.frames.push_back(render_frame(labeled.scene, f));
    return out;
}

Clip generate_clip(const ScenarioConfig& config) { return generate_synth_clip(config).clip; }

LaneMask default_lane_mask() {
    LaneMask mask(kFrameWidth, kFrameHeight, 0);
    for (int y = kRoadTop; y < kRoadBottom; ++y)
        for (int x = 0; x < kFrameWidth; ++x) mask.at(x, y) = 1;
    return mask;
}

DatasetMix default_mix() { return DatasetMix{281, 111, 56, 131, 16}; }

DatasetMix scaled_mix(int total) {
    const DatasetMix ref = default_mix();
    const int counts[5] = {ref.no_event, ref.stationary, ref.departing, ref.wrong_way, ref.car_crash};
    const int ref_total = ref.total();
    int out[5];
    double rema[5];
    int assigned = 0;
    for (int i = 0; i < 5; ++i) {
        const double exact = static_cast<double>(counts[i]) * total / ref_total;
        out[i] = static_cast<int>(std::floor(exact));
        rema[i] = exact - out[i];
        assigned += out[i];
    }
    while (assigned < total) {
        int best = 0;
        for (int i = 1; i < 5; ++i)
            if (rema[i] > rema[best]) best = i;
        ++out[best];
        rema[best] = -1.0;
        ++assigned;
    }
    return DatasetMix{out[0], out[1], out[2], out[3], out[4]};
}

void generate_dataset(const DatasetMix& mix, uint64_t master_seed, const ClipSink& sink) {
    const std::pair<ScenarioKind, int> plan[] = {
        {ScenarioKind::NoEvent, mix.no_event},       {ScenarioKind::Stationary, mix.stationary},
        {ScenarioKind::Departing, mix.departing},    {ScenarioKind::WrongWay, mix.wrong_way},
        {ScenarioKind::CarCrash, mix.car_crash},
    };
    uint64_t k = 0;
    for (const auto& [kind, count] : plan) {
        for (int i = 0; i < count; ++i, ++k) {
            ScenarioConfig config;
            config.seed = hash_seed(master_seed, k);
            config.kind = kind;
            Rng cfg_rng(hash_seed(master_seed, 1000000 + k));
            config.n_background_vehicles = static_cast<int>(cfg_rng.uniform_int(0, 3));
            config.perturbations.noise_sigma = cfg_rng.uniform(0.0, 2.5);
            config.perturbations.brightness_drift = cfg_rng.uniform(-0.08, 0.08);
            config.perturbations.fog_contrast = cfg_rng.uniform(0.88, 1.0);

            SynthClip sc = generate_synth_clip(config);
            char idbuf[48];
            std::snprintf(idbuf, sizeof(idbuf), "clip_%05llu_%s", static_cast<unsigned long long>(k),
                          scenario_name(kind));
            sc.clip.clip_id = idbuf;

            ClipMeta meta;
            meta.clip_id = sc.clip.clip_id;
            meta.seed = config.seed;
            meta.event_onset_frame = sc.event_onset_frame;
            meta.scenario_kind = scenario_name(kind);
            sink(sc.clip, meta, config);
        }
    }
}

} // namespace tev
