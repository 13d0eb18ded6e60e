#include "asma/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "asma/error.hpp"
#include "asma/io_util.hpp"
#include "asma/ntu_format.hpp"
#include "asma/rng.hpp"

ASMA_NAMESPACE_BEGIN

std::size_t Dataset::num_classes() const {
    int top = -1;
    for (const auto& s : items)
        if (s.label()) top = std::max(top, *s.label());
    return static_cast<std::size_t>(top + 1);
}

void Dataset::validate() const {
    if (items.empty()) throw Error(ErrorCode::DatasetEmpty, "dataset has no sequences");
    for (const auto& s : items) {
        if (s.channels() != channels() || s.frames() != frames() || s.joints() != joints())
            throw Error(ErrorCode::ShapeMismatch, "dataset sequences differ in shape");
    }
}

bool is_held_out(std::size_t index, double fraction) {
    const double u = static_cast<double>(mix64(0x5eed5eedULL + index) >> 11) * 0x1.0p-53;
    return u < fraction;
}

Split split_dataset(const Dataset& data, double test_fraction) {
    Split split;
    for (std::size_t i = 0; i < data.size(); ++i)
        (is_held_out(i, test_fraction) ? split.test : split.train).items.push_back(data.items[i]);
    return split;
}

Dataset derive_dataset(const Dataset& data, Stream stream) {
    Dataset out;
    out.items.reserve(data.size());
    for (const auto& s : data.items) out.items.push_back(derive_stream(s, stream));
    return out;
}

void write_cache(std::ostream& out, const Dataset& data) {
    data.validate();
    out.write("ASMA", 4);
    write_u16(out, kCacheVersion);
    write_u32(out, static_cast<std::uint32_t>(data.channels()));
    write_u32(out, static_cast<std::uint32_t>(data.frames()));
    write_u32(out, static_cast<std::uint32_t>(data.joints()));
    write_u32(out, static_cast<std::uint32_t>(data.size()));
    for (const auto& s : data.items) {
        write_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(s.label().value_or(-1))));
        for (real v : s.data()) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
}

Dataset read_cache(std::istream& in, const GraphPtr& graph) {
    char magic[4];
    if (!in.read(magic, 4)) throw Error(ErrorCode::EmptyFile, "empty cache file");
    if (std::memcmp(magic, "ASMA", 4) != 0) throw Error(ErrorCode::MalformedRecord, "bad cache magic");
    const auto version = read_u16(in, "cache");
    if (version != kCacheVersion)
        throw Error(ErrorCode::MalformedRecord, "unsupported cache version " + std::to_string(version));
    const std::size_t C = read_u32(in, "cache"), T = read_u32(in, "cache"), V = read_u32(in, "cache"), N = read_u32(in, "cache");
    if (V != graph->num_joints())
        throw Error(ErrorCode::MalformedRecord,
                    "cache has " + std::to_string(V) + " joints, graph has " + std::to_string(graph->num_joints()));
    Dataset data;
    data.items.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
        const auto label = static_cast<std::int32_t>(read_u32(in, "cache"));
        std::vector<real> values(C * T * V);
        for (auto& v : values) v = static_cast<real>(std::bit_cast<float>(read_u32(in, "cache")));
        data.items.emplace_back(C, T, graph, std::move(values),
                                label < 0 ? std::nullopt : std::optional<int>(label));
    }
    return data;
}

void save_cache(const std::filesystem::path& path, const Dataset& data) {
    atomic_write(path, [&](std::ostream& out) { write_cache(out, data); }, true);
}

Dataset load_cache(const std::filesystem::path& path, const GraphPtr& graph) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return read_cache(in, graph);
}

Dataset load_dataset(const std::filesystem::path& path, const GraphPtr& graph, std::size_t frames,
                     bool all_bodies) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw Error(ErrorCode::Io, "no such file or directory: " + path.string());
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".skeleton") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty() && fs::is_regular_file(path / kCacheFileName)) return load_cache(path / kCacheFileName, graph);
        if (files.empty()) throw Error(ErrorCode::DatasetEmpty, "no .skeleton files in " + path.string());
    } else if (path.extension() == ".skeleton") {
        files.push_back(path);
    } else {
        return load_cache(path, graph);
    }
    Dataset data;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw Error(ErrorCode::Io, "cannot open " + file.string());
        std::vector<SkeletonSequence> bodies;
        try {
            bodies = parse_ntu_skeleton(in, graph);
        } catch (const ParseError& e) {
            throw ParseError(e.code(), e.line(), file.string() + ": " + e.what());
        }
        const auto label = ntu_label_from_filename(file.filename().string());
        for (std::size_t b = 0; b < bodies.size() && (all_bodies || b == 0); ++b) {
            auto seq = bodies[b].frames() == frames ? bodies[b] : resample_frames(bodies[b], frames);
            seq.set_label(label);
            data.items.push_back(std::move(seq));
        }
    }
    return data;
}

ASMA_NAMESPACE_END
