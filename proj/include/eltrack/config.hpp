#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace eltrack {

struct ModelConfig {
    int num_trackers = 10;   // N
    int memory_length = 5;   // L
    int embed_dim = 64;      // c
    int backbone_dim = 128;  // C
    int backbone_width = 16; // channels of the first conv block
    int heads = 4;
    int points = 4;
    int encoder_layers = 2;
    int decoder_layers = 2;
    int ffn_mult = 2;
    int template_size = 128;
    int search_width = 640;
    int search_height = 480;
    std::uint64_t seed = 1;

    void validate() const;
};

struct LossWeights {
    double cls = 1.0;
    double ref = 5.0;
    double l1 = 5.0;
    double iou = 2.0;
    double focal_gamma = 2.0;
    double focal_alpha = 0.25;
    // Weight of the template-similarity term that trains the confidence
    // embedding; 0 leaves the training objective at the sequence loss alone.
    double similarity = 1.0;

    void validate() const;
};

/// Sequence-length schedule: each entry starts `length` at `epoch`.
struct CurriculumStage {
    int epoch = 0;
    int length = 2;
};

struct TrainConfig {
    double learning_rate = 5e-4;
    double weight_decay = 1e-4;
    double grad_clip = 0.5;
    int lr_decay_epoch = 1000000;
    double lr_decay_factor = 0.1;
    int epochs = 30;
    int batch_size = 1;
    int num_sequences = 64;
    int max_frame_gap = 2;
    std::uint64_t seed = 1;
    std::vector<CurriculumStage> curriculum = {{0, 2}, {4, 3}, {8, 4}, {12, 5}, {16, 6}};

    /// Total sample length (template + testing frames) at an epoch.
    int sample_length(int epoch) const;
    void validate() const;
};

struct RuntimeConfig {
    double theta = 0.5;
    double alpha_select = 1.0;
    // false gives the one-shot-detector ablation: no reference or query
    // transfer between frames.
    bool temporal_transfer = true;

    void validate() const;
};

struct WorldConfig {
    int width = 320;
    int height = 240;
    int length = 40;
    double target_min_size = 24.0;  // pixels
    double target_max_size = 44.0;
    double speed_min = 1.0;  // pixels per frame
    double speed_max = 5.0;
    double turn_noise = 0.25;  // radians per frame, std-dev
    double occlusion_prob = 0.02;  // per-frame event start probability
    double out_of_view_prob = 0.02;
    int absent_min = 2;
    int absent_max = 6;
    double min_displacement = 0.25;  // normalized center distance on reappearance
    int distractors = 1;
    double distractor_color_delta = 90.0;  // RGB L-inf distance from target color
    double texture_noise = 12.0;
    // >= 0 schedules exactly one out-of-view event at that frame instead of
    // the random schedule.
    int scripted_event_frame = -1;
    int scripted_event_length = 4;
    std::uint64_t seed = 1;

    void validate() const;
};

struct Config {
    ModelConfig model;
    LossWeights loss;
    TrainConfig train;
    RuntimeConfig runtime;
    WorldConfig world;
};

/// Parses flat `key=value` text ('#' starts a comment). Unknown keys and
/// malformed values throw ValidationError. Keys absent from the text keep
/// the values already in `base`.
Config parse_config(const std::string& text, Config base = {});
Config load_config(const std::filesystem::path& path);
std::string to_text(const Config& cfg);

std::vector<CurriculumStage> parse_curriculum(const std::string& text);
std::string format_curriculum(const std::vector<CurriculumStage>& stages);

}  // namespace eltrack
