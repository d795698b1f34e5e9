#include "eltrack/runtime.hpp"

#include <cstdio>
#include <fstream>

#include "eltrack/hungarian.hpp"
#include "eltrack/synthetic.hpp"

namespace eltrack {

int SessionState::activated_count() const {
    int n = 0;
    for (const auto& t : trackers) n += t.activated ? 1 : 0;
    return n;
}

std::optional<int> SessionState::active_tracker() const {
    for (const auto& t : trackers) {
        if (t.activated) return t.id;
    }
    return std::nullopt;
}

SessionState init_sequence(const TrackerModel<float>& model, const Image& first_frame, const BBox& gt,
                           const RuntimeConfig& runtime) {
    runtime.validate();
    const NoGradGuard no_grad;
    SessionState s;
    s.image_width = first_frame.width;
    s.image_height = first_frame.height;
    s.tmpl = model.build_template(first_frame, gt);
    s.trackers = model.make_trackers();
    s.runtime = runtime;
    s.initialized = true;
    s.frame_index = 0;
    // The first frame is reported present, so its box anchors the selection.
    s.present = true;
    s.previous_position = box_center(initial_result(gt, s.image_width, s.image_height).box);
    return s;
}

std::size_t select_final(std::span<const Candidate> candidates, const std::optional<Point2>& prev, double alpha) {
    if (candidates.empty()) {
        throw ValidationError("select_final: no candidates");
    }
    if (!prev) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            if (candidates[i].confidence > candidates[best].confidence) best = i;
        }
        return best;
    }
    CostMatrix cost(1, static_cast<Index>(candidates.size()));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        cost(0, static_cast<Index>(i)) =
            (1.0 - candidates[i].confidence) + alpha * l1_distance(box_center(candidates[i].box), *prev);
    }
    return static_cast<std::size_t>(solve_assignment(cost).row_to_col.front());
}

TrackResult initial_result(const BBox& gt, int image_width, int image_height) {
    TrackResult r;
    r.frame_index = 0;
    const PixelBox p = to_pixels(gt, image_width, image_height);
    r.pixels = {quantize6(p.x0), quantize6(p.y0), quantize6(p.w), quantize6(p.h)};
    r.box = from_pixels(r.pixels, image_width, image_height);
    r.confidence = 1.0;
    r.present = true;
    return r;
}

TrackResult track_frame(const TrackerModel<float>& model, SessionState& state, const Image& frame) {
    if (!state.initialized) {
        throw ValidationError("track_frame: session not initialized");
    }
    if (frame.width != state.image_width || frame.height != state.image_height) {
        throw ValidationError("track_frame: frame size differs from the first frame");
    }
    const NoGradGuard no_grad;
    const FrameOutput<float> out = model.forward_frame(state.tmpl, frame, state.trackers);
    const std::vector<Candidate> cands = make_candidates(out.head);
    const std::size_t w = select_final(cands, state.previous_position, state.runtime.alpha_select);

    TrackResult r;
    r.frame_index = ++state.frame_index;
    r.tracker_id = cands[w].tracker_id;
    const PixelBox p = to_pixels(cands[w].box, frame.width, frame.height);
    r.pixels = {quantize6(p.x0), quantize6(p.y0), quantize6(p.w), quantize6(p.h)};
    r.box = from_pixels(r.pixels, frame.width, frame.height);
    r.confidence = quantize6(cands[w].confidence);
    r.present = r.confidence >= state.runtime.theta;
    state.present = r.present;

    if (!r.present) {
        for (auto& t : state.trackers) t.reset();
        state.previous_position.reset();
        return r;
    }
    state.previous_position = box_center(r.box);
    if (!state.runtime.temporal_transfer) {
        return r;
    }
    for (auto& t : state.trackers) {
        if (t.id != r.tracker_id && t.activated) t.reset();
    }
    LocalTracker<float>& active = state.trackers[static_cast<std::size_t>(r.tracker_id)];
    active.online_query = model.tca.forward(ops::slice_rows(out.decoded.embeddings, r.tracker_id, 1), active.memory);
    active.memory.push(active.online_query);
    Candidate accepted = cands[w];
    accepted.box = r.box;
    active.set_reference(transfer_reference(accepted));
    active.activated = true;
    return r;
}

std::vector<TrackResult> track_sequence_dir(const TrackerModel<float>& model, const std::filesystem::path& seq_dir,
                                            const RuntimeConfig& runtime) {
    const int n = count_frames(seq_dir);
    if (n == 0) {
        throw IoError("no frames in " + seq_dir.string());
    }
    const Image first = read_ppm(frame_path(seq_dir, 0));
    const auto labels = read_annotations(seq_dir / "groundtruth.txt", first.width, first.height);
    if (labels.empty() || !labels.front().present) {
        throw ValidationError("first frame of " + seq_dir.string() + " has no target box");
    }
    SessionState state = init_sequence(model, first, labels.front().box, runtime);
    std::vector<TrackResult> results{initial_result(labels.front().box, first.width, first.height)};
    for (int i = 1; i < n; ++i) {
        results.push_back(track_frame(model, state, read_ppm(frame_path(seq_dir, i))));
    }
    return results;
}

void write_results(const std::filesystem::path& file, std::span<const TrackResult> results) {
    std::ofstream out(file);
    if (!out) {
        throw IoError("cannot write results " + file.string());
    }
    char line[192];
    for (const auto& r : results) {
        std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", r.frame_index, r.pixels.x0,
                      r.pixels.y0, r.pixels.w, r.pixels.h, r.confidence, r.present ? 1 : 0);
        out << line;
    }
}

std::vector<TrackResult> read_results(const std::filesystem::path& file, int image_width, int image_height) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open results " + file.string());
    }
    std::vector<TrackResult> results;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        TrackResult r;
        int present = 0;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%d", &r.frame_index, &r.pixels.x0, &r.pixels.y0,
                        &r.pixels.w, &r.pixels.h, &r.confidence, &present) != 7 ||
            (present != 0 && present != 1)) {
            throw IoError("malformed results line in " + file.string() + ": " + line);
        }
        r.present = present == 1;
        r.box = from_pixels(r.pixels, image_width, image_height);
        results.push_back(r);
    }
    return results;
}

}  // namespace eltrack
