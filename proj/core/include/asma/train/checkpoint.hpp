#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "asma/nn/module.hpp"

ASMA_NAMESPACE_BEGIN
namespace train {

// Checkpoint file, little-endian:
//   "ASMACKPT" | u16 version | u64 config digest | u32 len, config text
//   | u32 blob count | blobs
// blob: u32 name len | name | u32 rank | rank x u32 dims | float32 payload
// Parameters and batch-norm running statistics are both stored as blobs.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct BlobInfo {
    std::string name;
    ad::Shape shape;
};

struct CheckpointInfo {
    std::uint16_t version = kCheckpointVersion;
    std::uint64_t digest = 0;
    std::string config_text;
    std::vector<BlobInfo> blobs;
};

void save_checkpoint(const std::filesystem::path& path, const nn::StateRefs& state, std::uint64_t digest,
                     const std::string& config_text);

/// Header and blob directory only.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Fills every parameter and buffer of `state` from the file. Throws
/// CheckpointMismatch when the digest differs from `expected_digest`, a name
/// is missing, or a shape differs.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, const nn::StateRefs& state,
                               std::optional<std::uint64_t> expected_digest = std::nullopt);

}  // namespace train
ASMA_NAMESPACE_END
