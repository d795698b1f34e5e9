#include "eltrack/synthetic.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "eltrack/errors.hpp"

namespace eltrack {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic value in [-1, 1] for a lattice point.
double lattice_noise(std::uint64_t seed, std::int64_t a, std::int64_t b) {
    const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(a) * 0x100000001b3ULL +
                                                         static_cast<std::uint64_t>(b)));
    return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

class WorldRng {
public:
    explicit WorldRng(std::uint64_t seed) : state_(splitmix64(seed)) {}

    double uniform01() {
        state_ = splitmix64(state_);
        return static_cast<double>(state_ >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    int uniform_int(int lo, int hi) {
        return lo + std::min(hi - lo, static_cast<int>(uniform01() * (hi - lo + 1)));
    }
    double normal() {
        const double u1 = std::max(uniform01(), 1e-300);
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

struct Mover {
    double heading = 0.0;
    double speed = 0.0;
};

// Moves obj one step, reflecting off the frame so the box stays inside.
void step(SceneObject& obj, Mover& m, const WorldConfig& cfg, WorldRng& rng) {
    m.heading += cfg.turn_noise * rng.normal();
    obj.cx += m.speed * std::cos(m.heading);
    obj.cy += m.speed * std::sin(m.heading);
    const double lo_x = obj.w / 2.0, hi_x = cfg.width - obj.w / 2.0;
    const double lo_y = obj.h / 2.0, hi_y = cfg.height - obj.h / 2.0;
    if (obj.cx < lo_x || obj.cx > hi_x) {
        obj.cx = obj.cx < lo_x ? 2 * lo_x - obj.cx : 2 * hi_x - obj.cx;
        obj.cx = std::clamp(obj.cx, lo_x, hi_x);
        m.heading = std::numbers::pi - m.heading;
    }
    if (obj.cy < lo_y || obj.cy > hi_y) {
        obj.cy = obj.cy < lo_y ? 2 * lo_y - obj.cy : 2 * hi_y - obj.cy;
        obj.cy = std::clamp(obj.cy, lo_y, hi_y);
        m.heading = -m.heading;
    }
}

void place_uniform(SceneObject& obj, const WorldConfig& cfg, WorldRng& rng) {
    obj.cx = rng.uniform(obj.w / 2.0, cfg.width - obj.w / 2.0);
    obj.cy = rng.uniform(obj.h / 2.0, cfg.height - obj.h / 2.0);
}

double normalized_distance(double ax, double ay, double bx, double by, const WorldConfig& cfg) {
    return std::hypot((ax - bx) / cfg.width, (ay - by) / cfg.height);
}

// New location at least min_displacement (normalized) away from (px, py).
void place_displaced(SceneObject& obj, double px, double py, const WorldConfig& cfg, WorldRng& rng) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        place_uniform(obj, cfg, rng);
        if (normalized_distance(obj.cx, obj.cy, px, py, cfg) >= cfg.min_displacement) {
            return;
        }
    }
    // Fall back to the farthest admissible corner.
    const double xs[2] = {obj.w / 2.0, cfg.width - obj.w / 2.0};
    const double ys[2] = {obj.h / 2.0, cfg.height - obj.h / 2.0};
    double best = -1.0;
    for (double x : xs) {
        for (double y : ys) {
            const double d = normalized_distance(x, y, px, py, cfg);
            if (d > best) {
                best = d;
                obj.cx = x;
                obj.cy = y;
            }
        }
    }
}

Rgb random_target_color(WorldRng& rng) {
    // Saturated: one channel high, one low, one free, all within [40, 215].
    Rgb c{};
    const int hi = rng.uniform_int(0, 2);
    const int lo = (hi + rng.uniform_int(1, 2)) % 3;
    for (int k = 0; k < 3; ++k) {
        c[k] = to_byte(rng.uniform(40.0, 215.0));
    }
    c[hi] = to_byte(rng.uniform(170.0, 215.0));
    c[lo] = to_byte(rng.uniform(40.0, 80.0));
    return c;
}

Rgb perturbed_color(const Rgb& base, double delta, WorldRng& rng) {
    Rgb c = base;
    const int k = rng.uniform_int(0, 2);
    const double up = base[k] + delta;
    c[k] = to_byte(up <= 255.0 ? up : base[k] - delta);
    return c;
}

GroundTruth label_for(const SceneObject& target, bool present, const WorldConfig& cfg) {
    GroundTruth gt;
    gt.present = present;
    if (present) {
        gt.pixels = PixelBox{quantize6(target.cx - target.w / 2.0), quantize6(target.cy - target.h / 2.0),
                             quantize6(target.w), quantize6(target.h)};
        gt.box = from_pixels(gt.pixels, cfg.width, cfg.height);
    }
    return gt;
}

bool covers(const SceneObject& o, double px, double py) {
    const double dx = (px - o.cx) / (o.w / 2.0);
    const double dy = (py - o.cy) / (o.h / 2.0);
    if (o.shape == Shape::Rectangle) {
        return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
    }
    return dx * dx + dy * dy <= 1.0;
}

void paint(Image& img, const SceneObject& o, std::uint64_t texture_seed, double noise) {
    const int x0 = std::max(0, static_cast<int>(std::floor(o.cx - o.w / 2.0)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(o.cx + o.w / 2.0)));
    const int y0 = std::max(0, static_cast<int>(std::floor(o.cy - o.h / 2.0)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(o.cy + o.h / 2.0)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (!covers(o, x + 0.5, y + 0.5)) continue;
            // Texture is attached to the object, so it moves with it.
            const auto rx = static_cast<std::int64_t>(std::floor(x + 0.5 - o.cx));
            const auto ry = static_cast<std::int64_t>(std::floor(y + 0.5 - o.cy));
            const double n = noise * lattice_noise(texture_seed, rx, ry);
            img.set(x, y, {to_byte(o.color[0] + n), to_byte(o.color[1] + n), to_byte(o.color[2] + n)});
        }
    }
}

}  // namespace

double quantize6(double v) { return std::round(v * 1e6) / 1e6; }

std::uint64_t sequence_seed(std::uint64_t base_seed, int index) {
    return splitmix64(base_seed * 0x2545f4914f6cdd1dULL + static_cast<std::uint64_t>(index) + 1);
}

SequencePlan plan_sequence(const WorldConfig& cfg) {
    cfg.validate();
    WorldRng rng(cfg.seed);
    SequencePlan plan;
    plan.cfg = cfg;

    SceneObject target;
    target.w = rng.uniform(cfg.target_min_size, cfg.target_max_size);
    target.h = rng.uniform(cfg.target_min_size, cfg.target_max_size);
    target.shape = rng.uniform01() < 0.5 ? Shape::Rectangle : Shape::Ellipse;
    target.color = random_target_color(rng);
    place_uniform(target, cfg, rng);
    Mover target_motion{rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(cfg.speed_min, cfg.speed_max)};

    std::vector<SceneObject> distractors(static_cast<std::size_t>(cfg.distractors));
    std::vector<Mover> distractor_motion(distractors.size());
    for (std::size_t i = 0; i < distractors.size(); ++i) {
        SceneObject& d = distractors[i];
        d.w = target.w;
        d.h = target.h;
        d.shape = target.shape;
        d.color = perturbed_color(target.color, cfg.distractor_color_delta, rng);
        place_displaced(d, target.cx, target.cy, cfg, rng);
        distractor_motion[i] = {rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(cfg.speed_min, cfg.speed_max)};
    }

    const bool scripted = cfg.scripted_event_frame >= 0;
    int event_end = -1;  // first present frame after the active event
    EventKind active_kind = EventKind::OutOfView;
    double last_cx = target.cx, last_cy = target.cy;

    for (int t = 0; t < cfg.length; ++t) {
        if (t > 0) {
            step(target, target_motion, cfg, rng);
            for (std::size_t i = 0; i < distractors.size(); ++i) {
                step(distractors[i], distractor_motion[i], cfg, rng);
            }
        }
        const bool reappearing = t == event_end;
        if (reappearing) {
            place_displaced(target, last_cx, last_cy, cfg, rng);
            event_end = -1;
        }
        // Event draws happen every frame so the random stream does not depend
        // on whether an event could start.
        const double u = rng.uniform01();
        const int len = rng.uniform_int(cfg.absent_min, cfg.absent_max);
        if (event_end < 0 && !reappearing && t >= 1) {
            WorldEvent ev;
            bool start = false;
            if (scripted) {
                if (t == cfg.scripted_event_frame) {
                    ev = {EventKind::OutOfView, t, cfg.scripted_event_length};
                    start = true;
                }
            } else if (u < cfg.occlusion_prob + cfg.out_of_view_prob && t + len < cfg.length) {
                ev = {u < cfg.occlusion_prob ? EventKind::Occlusion : EventKind::OutOfView, t, len};
                start = true;
            }
            if (start) {
                plan.events.push_back(ev);
                event_end = ev.start + ev.length;
                active_kind = ev.kind;
                last_cx = target.cx;
                last_cy = target.cy;
            }
        }
        for (auto& d : distractors) {
            if (d.cx == target.cx && d.cy == target.cy) {
                d.cx = std::min(d.cx + 1.0, cfg.width - d.w / 2.0);
                if (d.cx == target.cx) d.cx -= 1.0;
            }
        }

        SceneState s;
        s.frame_index = t;
        s.target = target;
        s.distractors = distractors;
        const bool absent = event_end >= 0;
        s.target_visible = !absent || active_kind == EventKind::Occlusion;
        s.occluded = absent && active_kind == EventKind::Occlusion;
        if (s.occluded) {
            s.occluder.w = std::min(target.w * 1.25 + 8.0, static_cast<double>(cfg.width));
            s.occluder.h = std::min(target.h * 1.25 + 8.0, static_cast<double>(cfg.height));
            s.occluder.cx = target.cx;
            s.occluder.cy = target.cy;
            s.occluder.shape = Shape::Rectangle;
            s.occluder.color = {90, 90, 90};
        }
        plan.labels.push_back(label_for(target, !absent, cfg));
        plan.states.push_back(std::move(s));
    }
    return plan;
}

Image render_frame(const WorldConfig& cfg, const SceneState& state) {
    Image img(cfg.width, cfg.height);
    // Static textured background: a horizontal gradient between two greys.
    WorldRng bg(cfg.seed ^ 0x5bd1e995ULL);
    const double g0 = bg.uniform(70.0, 150.0);
    const double g1 = bg.uniform(70.0, 150.0);
    const std::uint64_t bg_seed = splitmix64(cfg.seed + 17);
    for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
            const double base = g0 + (g1 - g0) * (x + 0.5) / cfg.width;
            const double n = cfg.texture_noise * lattice_noise(bg_seed, x, y);
            const std::uint8_t v = to_byte(base + n);
            img.set(x, y, {v, v, v});
        }
    }
    for (std::size_t i = 0; i < state.distractors.size(); ++i) {
        paint(img, state.distractors[i], splitmix64(cfg.seed + 101 + i), cfg.texture_noise);
    }
    if (state.target_visible) {
        paint(img, state.target, splitmix64(cfg.seed + 7), cfg.texture_noise);
    }
    if (state.occluded) {
        paint(img, state.occluder, splitmix64(cfg.seed + 13), cfg.texture_noise);
    }
    return img;
}

SyntheticSequence generate_sequence(const WorldConfig& cfg, const std::string& name) {
    const SequencePlan plan = plan_sequence(cfg);
    SyntheticSequence seq;
    seq.name = name;
    seq.events = plan.events;
    for (int t = 0; t < plan.length(); ++t) {
        seq.frames.push_back({render_frame(cfg, plan.states[t]), plan.labels[t]});
    }
    return seq;
}

std::filesystem::path frame_path(const std::filesystem::path& seq_dir, int index) {
    char name[32];
    std::snprintf(name, sizeof(name), "%05d.ppm", index);
    return seq_dir / name;
}

void write_annotations(const std::filesystem::path& file, const std::vector<GroundTruth>& labels) {
    std::ofstream out(file);
    if (!out) {
        throw IoError("cannot write annotations " + file.string());
    }
    char line[160];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& g = labels[i];
        const PixelBox p = g.present ? g.pixels : PixelBox{};
        std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%.6f,%.6f,%d\n", i, p.x0, p.y0, p.w, p.h,
                      g.present ? 1 : 0);
        out << line;
    }
}

std::vector<GroundTruth> read_annotations(const std::filesystem::path& file, int image_width, int image_height) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open annotations " + file.string());
    }
    std::vector<GroundTruth> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int index = 0;
        int present = 0;
        PixelBox p;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%d", &index, &p.x0, &p.y0, &p.w, &p.h, &present) != 6 ||
            index != static_cast<int>(labels.size()) || (present != 0 && present != 1)) {
            throw IoError("malformed annotation line in " + file.string() + ": " + line);
        }
        GroundTruth g;
        g.present = present == 1;
        if (g.present) {
            g.pixels = p;
            g.box = from_pixels(p, image_width, image_height);
        }
        labels.push_back(g);
    }
    return labels;
}

void write_sequence(const std::filesystem::path& root, const SyntheticSequence& seq) {
    const auto dir = root / seq.name;
    std::filesystem::create_directories(dir);
    std::vector<GroundTruth> labels;
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        write_ppm(seq.frames[i].image, frame_path(dir, static_cast<int>(i)));
        labels.push_back(seq.frames[i].gt);
    }
    write_annotations(dir / "groundtruth.txt", labels);
}

std::vector<std::string> list_sequences(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) {
        throw IoError("dataset directory not found: " + root.string());
    }
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "groundtruth.txt")) {
            names.push_back(entry.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

int count_frames(const std::filesystem::path& seq_dir) {
    int n = 0;
    while (std::filesystem::exists(frame_path(seq_dir, n))) {
        ++n;
    }
    return n;
}

}  // namespace eltrack
