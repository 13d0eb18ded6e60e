#include "asma/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "asma/error.hpp"
#include "asma/io_util.hpp"

ASMA_NAMESPACE_BEGIN
namespace train {

namespace {

constexpr char kMagic[8] = {'A', 'S', 'M', 'A', 'C', 'K', 'P', 'T'};

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const char* what) {
    const std::uint32_t n = read_u32(in, what);
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) throw Error(ErrorCode::MalformedRecord, std::string("truncated ") + what);
    return s;
}

void write_blob(std::ostream& out, const std::string& name, const ad::Shape& shape, std::span<const real> values) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) write_u32(out, static_cast<std::uint32_t>(d));
    for (real v : values) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

struct Blob {
    ad::Shape shape;
    std::vector<real> values;
};

CheckpointInfo read_header(std::istream& in, const std::string& path) {
    char magic[8];
    if (!in.read(magic, 8)) throw Error(ErrorCode::CheckpointMismatch, path + ": not a checkpoint (too short)");
    if (std::memcmp(magic, kMagic, 8) != 0) throw Error(ErrorCode::CheckpointMismatch, path + ": bad checkpoint magic");
    CheckpointInfo info;
    info.version = read_u16(in, "checkpoint header");
    if (info.version != kCheckpointVersion)
        throw Error(ErrorCode::CheckpointMismatch, path + ": unsupported checkpoint version " + std::to_string(info.version));
    info.digest = read_u64(in, "checkpoint header");
    info.config_text = read_string(in, "checkpoint config");
    return info;
}

std::map<std::string, Blob> read_blobs(std::istream& in, CheckpointInfo& info, bool keep_values) {
    std::map<std::string, Blob> blobs;
    const std::uint32_t count = read_u32(in, "checkpoint blob count");
    for (std::uint32_t b = 0; b < count; ++b) {
        Blob blob;
        const std::string name = read_string(in, "checkpoint blob name");
        const std::uint32_t rank = read_u32(in, "checkpoint blob");
        for (std::uint32_t r = 0; r < rank; ++r) blob.shape.push_back(read_u32(in, "checkpoint blob"));
        const std::size_t n = ad::shape_size(blob.shape);
        if (keep_values) {
            blob.values.resize(n);
            for (auto& v : blob.values) v = static_cast<real>(std::bit_cast<float>(read_u32(in, "checkpoint payload")));
        } else {
            in.seekg(static_cast<std::streamoff>(4 * n), std::ios::cur);
        }
        info.blobs.push_back({name, blob.shape});
        blobs.emplace(name, std::move(blob));
    }
    return blobs;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nn::StateRefs& state, std::uint64_t digest,
                     const std::string& config_text) {
    atomic_write(
        path,
        [&](std::ostream& out) {
            out.write(kMagic, 8);
            write_u16(out, kCheckpointVersion);
            write_u64(out, digest);
            write_string(out, config_text);
            write_u32(out, static_cast<std::uint32_t>(state.params.size() + state.buffers.size()));
            for (const auto& p : state.params) write_blob(out, p.name, p.tensor.shape(), p.tensor.values());
            for (const auto& b : state.buffers) write_blob(out, b.name, {b.values->size()}, *b.values);
        },
        true);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    auto info = read_header(in, path.string());
    read_blobs(in, info, false);
    return info;
}

CheckpointInfo load_checkpoint(const std::filesystem::path& path, const nn::StateRefs& state,
                               std::optional<std::uint64_t> expected_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    auto info = read_header(in, path.string());
    if (expected_digest && *expected_digest != info.digest)
        throw Error(ErrorCode::CheckpointMismatch, path.string() + ": config digest " + hex64(info.digest) +
                                                       " does not match expected " + hex64(*expected_digest));
    auto blobs = read_blobs(in, info, true);
    auto take = [&](const std::string& name, const ad::Shape& shape) -> std::vector<real>& {
        auto it = blobs.find(name);
        if (it == blobs.end()) throw Error(ErrorCode::CheckpointMismatch, path.string() + ": missing '" + name + "'");
        if (it->second.shape != shape)
            throw Error(ErrorCode::CheckpointMismatch, path.string() + ": '" + name + "' has shape " +
                                                           ad::shape_string(it->second.shape) + ", expected " +
                                                           ad::shape_string(shape));
        return it->second.values;
    };
    for (const auto& p : state.params) {
        const auto& v = take(p.name, p.tensor.shape());
        ad::Tensor t = p.tensor;
        std::copy(v.begin(), v.end(), t.values().begin());
    }
    for (const auto& b : state.buffers) {
        const auto& v = take(b.name, {b.values->size()});
        *b.values = v;
    }
    return info;
}

}  // namespace train
ASMA_NAMESPACE_END
