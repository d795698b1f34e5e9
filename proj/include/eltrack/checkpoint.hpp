#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "eltrack/config.hpp"
#include "eltrack/model.hpp"

namespace eltrack {

inline constexpr const char* kCheckpointVersion = "eltrack-checkpoint-1";

// Binary layout (little endian): magic "ELTK", version string, config text,
// normalization statistics, named float parameter blocks, crc32 trailer.
void save_checkpoint(const std::filesystem::path& path, const TrackerModel<float>& model, const Config& cfg);

struct LoadedCheckpoint {
    Config config;
    std::unique_ptr<TrackerModel<float>> model;
};

/// Builds a fresh model from the stored config and fills it. Throws IoError
/// on a missing, truncated or corrupted file and on a version mismatch;
/// nothing is returned in those cases.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace eltrack
