#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eltrack/config.hpp"
#include "eltrack/geometry.hpp"
#include "eltrack/image.hpp"

namespace eltrack {

/// Per-frame label: the box is meaningful only when present.
struct GroundTruth {
    bool present = false;
    PixelBox pixels;  // (x0, y0, w, h), 6-decimal quantized
    BBox box;         // normalized form of `pixels`

    Point2 center() const { return box_center(box); }
};

struct AnnotatedFrame {
    Image image;
    GroundTruth gt;
};

enum class Shape { Rectangle, Ellipse };

struct SceneObject {
    double cx = 0.0;  // pixels
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    Rgb color{0, 0, 0};
    Shape shape = Shape::Rectangle;
};

enum class EventKind { Occlusion, OutOfView };

struct WorldEvent {
    EventKind kind = EventKind::OutOfView;
    int start = 0;   // first absent frame
    int length = 0;  // absent frames
};

/// Scene state of one frame: everything render_frame needs.
struct SceneState {
    int frame_index = 0;
    SceneObject target;
    bool target_visible = true;
    bool occluded = false;
    SceneObject occluder;
    std::vector<SceneObject> distractors;
};

/// Motion and event schedule of a whole sequence, without pixels.
struct SequencePlan {
    WorldConfig cfg;
    std::vector<SceneState> states;
    std::vector<WorldEvent> events;
    std::vector<GroundTruth> labels;

    int length() const { return static_cast<int>(states.size()); }
};

SequencePlan plan_sequence(const WorldConfig& cfg);
Image render_frame(const WorldConfig& cfg, const SceneState& state);

struct SyntheticSequence {
    std::string name;
    std::vector<AnnotatedFrame> frames;
    std::vector<WorldEvent> events;
};

/// Pure function of cfg (including its seed).
SyntheticSequence generate_sequence(const WorldConfig& cfg, const std::string& name = "seq");

/// Seed of sequence `index` in a set generated from `base_seed`.
std::uint64_t sequence_seed(std::uint64_t base_seed, int index);

/// Rounds to 6 decimals so text round trips are exact.
double quantize6(double v);

// Dataset layout: <root>/<sequence>/NNNNN.ppm plus <root>/<sequence>/groundtruth.txt
// with lines "frame_index,x0,y0,w,h,present".
void write_sequence(const std::filesystem::path& root, const SyntheticSequence& seq);
void write_annotations(const std::filesystem::path& file, const std::vector<GroundTruth>& labels);
std::vector<GroundTruth> read_annotations(const std::filesystem::path& file, int image_width, int image_height);
std::vector<std::string> list_sequences(const std::filesystem::path& root);
std::filesystem::path frame_path(const std::filesystem::path& seq_dir, int index);
int count_frames(const std::filesystem::path& seq_dir);

}  // namespace eltrack
