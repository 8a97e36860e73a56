#include <doctest.h>

#include <cmath>
#include <map>

#include "tev/synth.hpp"

using namespace tev;

namespace {

int first_labeled_frame(const Clip& clip, EventClass cls) {
    for (size_t t = 0; t < clip.length(); ++t)
        if (clip.labels[t][cls]) return static_cast<int>(t);
    return -1;
}

int count_labeled(const Clip& clip, EventClass cls) {
    int n = 0;
    for (const auto& l : clip.labels) n += l[cls] ? 1 : 0;
    return n;
}

} // namespace

TEST_CASE("no-event clips carry no labels") {
    for (uint64_t seed : {1, 9, 77}) {
        ScenarioConfig config{seed, ScenarioKind::NoEvent, 2, {}};
        const Clip clip = generate_clip(config);
        REQUIRE(clip.length() == kClipFrames);
        for (const auto& l : clip.labels) CHECK(!l.any());
    }
}

TEST_CASE("wrong-way clips label only wrong-way frames") {
    ScenarioConfig config{7, ScenarioKind::WrongWay, 1, {}};
    const Clip clip = generate_clip(config);
    CHECK(count_labeled(clip, EventClass::WrongWay) > 0);
    CHECK(count_labeled(clip, EventClass::Stationary) == 0);
    CHECK(count_labeled(clip, EventClass::Departing) == 0);
    CHECK(count_labeled(clip, EventClass::CarCrash) == 0);
}

TEST_CASE("generation is a pure function of the config") {
    ScenarioConfig config{3, ScenarioKind::Stationary, 2, {1.5, 0.02, 0.95}};
    const auto a = serialize_clip(generate_clip(config));
    const auto b = serialize_clip(generate_clip(config));
    CHECK(a == b);
}

TEST_CASE("label sanity across kinds and seeds") {
    for (ScenarioKind kind : {ScenarioKind::Stationary, ScenarioKind::Departing, ScenarioKind::WrongWay,
                              ScenarioKind::CarCrash}) {
        const EventClass cls = static_cast<EventClass>(static_cast<int>(kind));
        for (uint64_t seed = 0; seed < 25; ++seed) {
            ScenarioConfig config{seed * 31 + 5, kind, static_cast<int>(seed % 4), {}};
            const SynthClip sc = generate_synth_clip(config);
            const int first = first_labeled_frame(sc.clip, cls);
            INFO(scenario_name(kind), " seed ", config.seed);
            REQUIRE(first >= 10); // events never begin in the first 10 frames
            CHECK(first <= 124);
            CHECK(sc.event_onset_frame >= 10);
            CHECK(sc.event_onset_frame <= 110);
            // single-event clips: no other class appears
            for (int other = 1; other <= 4; ++other)
                if (other != static_cast<int>(cls))
                    CHECK(count_labeled(sc.clip, static_cast<EventClass>(other)) == 0);
        }
    }
}

TEST_CASE("stationary and crash labels extend to the clip end") {
    for (uint64_t seed : {2, 20, 200}) {
        ScenarioConfig config{seed, ScenarioKind::Stationary, 0, {}};
        const Clip clip = generate_clip(config);
        const int first = first_labeled_frame(clip, EventClass::Stationary);
        REQUIRE(first >= 0);
        for (size_t t = first; t < clip.length(); ++t) CHECK(clip.labels[t][EventClass::Stationary]);

        ScenarioConfig crash{seed, ScenarioKind::CarCrash, 0, {}};
        const Clip cc = generate_clip(crash);
        const int cfirst = first_labeled_frame(cc, EventClass::CarCrash);
        REQUIRE(cfirst >= 0);
        for (size_t t = cfirst; t < cc.length(); ++t) CHECK(cc.labels[t][EventClass::CarCrash]);
    }
}

TEST_CASE("stationary vehicle renders identically across labeled frames") {
    ScenarioConfig config{12, ScenarioKind::Stationary, 0, {}}; // no perturbations
    const Clip clip = generate_clip(config);
    const int first = first_labeled_frame(clip, EventClass::Stationary);
    REQUIRE(first >= 0);
    // Once stopped, with no noise, consecutive frames are identical.
    for (size_t t = first + 3; t < clip.length(); ++t) CHECK(clip.frames[t] == clip.frames[first + 2]);
}

TEST_CASE("departing clips start parked and end cruising") {
    ScenarioConfig config{8, ScenarioKind::Departing, 0, {}};
    const Clip clip = generate_clip(config);
    const int first = first_labeled_frame(clip, EventClass::Departing);
    REQUIRE(first >= 10);
    // before onset the scene is static
    CHECK(clip.frames[1] == clip.frames[first - 2]);
    // the label switches off once cruise speed is reached (or the clip ends)
    const int last = [&] {
        int l = -1;
        for (size_t t = 0; t < clip.length(); ++t)
            if (clip.labels[t][EventClass::Departing]) l = static_cast<int>(t);
        return l;
    }();
    CHECK(last >= first);
}

TEST_CASE("render_frame with no vehicles and no perturbations is the background") {
    ScenarioConfig config{5, ScenarioKind::NoEvent, 0, {}};
    const Scene scene = build_scene(config);
    const Frame f0 = render_frame(scene, 0);
    const Frame f100 = render_frame(scene, 100);
    CHECK(f0 == f100);
    for (size_t i = 0; i < scene.background.size(); ++i)
        CHECK(f0.pixels[i] == static_cast<uint8_t>(std::clamp(std::lround(scene.background[i]), 0L, 255L)));
}

TEST_CASE("fog contrast pulls pixels toward the background mean") {
    ScenarioConfig plain{5, ScenarioKind::NoEvent, 0, {}};
    ScenarioConfig foggy = plain;
    foggy.perturbations.fog_contrast = 0.5;
    const Scene scene_plain = build_scene(plain);
    const Scene scene_fog = build_scene(foggy);
    const Frame base = render_frame(scene_plain, 0);
    const Frame fogged = render_frame(scene_fog, 0);
    const double mu = scene_plain.background_mean;
    for (size_t i = 0; i < base.pixels.size(); ++i) {
        const double expect = mu + 0.5 * (scene_plain.background[i] - mu);
        CHECK(fogged.pixels[i] == static_cast<uint8_t>(std::clamp(std::lround(expect), 0L, 255L)));
    }
}

TEST_CASE("vehicle size grows toward the bottom of the frame") {
    CHECK(perspective_scale(0) == doctest::Approx(0.5));
    CHECK(perspective_scale(119) == doctest::Approx(1.5));
    VehicleTrack t;
    t.states.assign(2, VehicleState{});
    t.states[0] = {80.0, 30.0, 0.0, true, 0, 0};
    t.states[1] = {80.0, 100.0, 0.0, true, 0, 0};
    const PixelRect top = vehicle_rect(t, 0);
    const PixelRect bottom = vehicle_rect(t, 1);
    CHECK(bottom.x1 - bottom.x0 > top.x1 - top.x0);
    CHECK(bottom.y1 - bottom.y0 > top.y1 - top.y0);
}

TEST_CASE("generate_dataset matches the requested mix exactly") {
    DatasetMix mix{3, 2, 1, 2, 2};
    std::map<std::string, int> counts;
    std::map<uint64_t, int> seeds;
    generate_dataset(mix, 17, [&](const Clip& clip, const ClipMeta& meta, const ScenarioConfig& config) {
        ++counts[meta.scenario_kind];
        ++seeds[config.seed];
        CHECK(clip.length() == kClipFrames);
        CHECK(meta.clip_id.find(meta.scenario_kind) != std::string::npos);
    });
    CHECK(counts["no_event"] == 3);
    CHECK(counts["stationary"] == 2);
    CHECK(counts["departing"] == 1);
    CHECK(counts["wrong_way"] == 2);
    CHECK(counts["car_crash"] == 2);
    CHECK(seeds.size() == 10); // per-clip seeds all distinct
}

TEST_CASE("empty mix yields an empty dataset") {
    int n = 0;
    generate_dataset(DatasetMix{}, 1, [&](const Clip&, const ClipMeta&, const ScenarioConfig&) { ++n; });
    CHECK(n == 0);
}

TEST_CASE("scaled mix keeps proportions and the exact total") {
    const DatasetMix m200 = scaled_mix(200);
    CHECK(m200.total() == 200);
    CHECK(m200.no_event == 95);
    CHECK(m200.stationary == 37);
    CHECK(m200.departing == 19);
    CHECK(m200.wrong_way == 44);
    CHECK(m200.car_crash == 5);
    const DatasetMix full = scaled_mix(595);
    CHECK(full.no_event == 281);
    CHECK(full.stationary == 111);
    CHECK(full.departing == 56);
    CHECK(full.wrong_way == 131);
    CHECK(full.car_crash == 16);
}

TEST_CASE("default lane mask covers the road band") {
    const LaneMask mask = default_lane_mask();
    CHECK(mask.at(80, 60) == 1);
    CHECK(mask.at(80, 5) == 0);
    CHECK(mask.at(80, 115) == 0);
}
