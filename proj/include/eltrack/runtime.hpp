#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "eltrack/config.hpp"
#include "eltrack/model.hpp"

namespace eltrack {

struct TrackResult {
    int frame_index = 0;
    PixelBox pixels;        // 6-decimal quantized
    BBox box;               // normalized form of `pixels`
    double confidence = 0;  // 6-decimal quantized
    bool present = false;
    int tracker_id = -1;    // winning tracker, -1 for the initial frame
};

struct SessionState {
    bool initialized = false;
    int frame_index = 0;
    int image_width = 0;
    int image_height = 0;
    std::vector<LocalTracker<float>> trackers;
    TemplateBundle<float> tmpl;
    std::optional<Point2> previous_position;
    bool present = false;
    RuntimeConfig runtime;

    int activated_count() const;
    /// Index of the activated tracker, if any.
    std::optional<int> active_tracker() const;
};

/// Template from the first frame; every tracker at its default state.
SessionState init_sequence(const TrackerModel<float>& model, const Image& first_frame, const BBox& gt,
                           const RuntimeConfig& runtime);

/// With a previous position: argmin over (1 - confidence) + alpha*|centre - prev|_1
/// through the bipartite solver. Without: highest confidence.
std::size_t select_final(std::span<const Candidate> candidates, const std::optional<Point2>& prev, double alpha);

/// One tracking step. Updates activation, references, online queries and
/// memories in `state`.
TrackResult track_frame(const TrackerModel<float>& model, SessionState& state, const Image& frame);

/// Result for the initialization frame: the given box at confidence 1.
TrackResult initial_result(const BBox& gt, int image_width, int image_height);

/// Tracks a dataset sequence directory (frames + groundtruth.txt), starting
/// from the first frame's annotation.
std::vector<TrackResult> track_sequence_dir(const TrackerModel<float>& model, const std::filesystem::path& seq_dir,
                                            const RuntimeConfig& runtime);

// Results file: "frame_index,x0,y0,w,h,confidence,present" per line.
void write_results(const std::filesystem::path& file, std::span<const TrackResult> results);
std::vector<TrackResult> read_results(const std::filesystem::path& file, int image_width, int image_height);

}  // namespace eltrack
