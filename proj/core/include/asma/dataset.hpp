#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <vector>

#include "asma/skeleton.hpp"

ASMA_NAMESPACE_BEGIN

/// A labelled collection of equally shaped sequences sharing one graph.
struct Dataset {
    std::vector<SkeletonSequence> items;

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
    const GraphPtr& graph() const { return items.front().graph_ptr(); }
    std::size_t channels() const { return items.front().channels(); }
    std::size_t frames() const { return items.front().frames(); }
    std::size_t joints() const { return items.front().joints(); }

    /// 1 + largest label; 0 when unlabelled.
    std::size_t num_classes() const;

    /// Throws DatasetEmpty when empty, ShapeMismatch when shapes differ.
    void validate() const;
};

/// Deterministic hold-out membership: sample `index` is held out when its
/// hash lands in the lowest `fraction` of the 64-bit range.
bool is_held_out(std::size_t index, double fraction = 0.2);

struct Split {
    Dataset train;
    Dataset test;
};
Split split_dataset(const Dataset& data, double test_fraction = 0.2);

/// Copy of `data` with every sequence mapped through derive_stream.
Dataset derive_dataset(const Dataset& data, Stream stream);

// Binary cache, little-endian:
//   "ASMA" | u16 version | u32 C | u32 T | u32 V | u32 N
//   N x ( i32 label (-1 = none) | C*T*V float32, C-major, then T, V fastest )
inline constexpr std::uint16_t kCacheVersion = 1;

void write_cache(std::ostream& out, const Dataset& data);
Dataset read_cache(std::istream& in, const GraphPtr& graph);

/// Atomic file variants (write to a temp name, then rename).
void save_cache(const std::filesystem::path& path, const Dataset& data);
Dataset load_cache(const std::filesystem::path& path, const GraphPtr& graph);

/// File name used for the cache inside a data directory.
inline constexpr const char* kCacheFileName = "data.cache";

/// Loads a dataset from a cache file, a `.skeleton` file, or a directory of
/// `.skeleton` files (sorted by path, resampled to `frames`). A directory
/// without `.skeleton` files but with a `data.cache` loads that cache. With
/// `all_bodies` false only the first body of each file is kept.
Dataset load_dataset(const std::filesystem::path& path, const GraphPtr& graph, std::size_t frames,
                     bool all_bodies = true);

ASMA_NAMESPACE_END
