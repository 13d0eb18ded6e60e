#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "asma/error.hpp"
#include "asma/io_util.hpp"
#include "asma/nn/encoder.hpp"
#include "asma/train/checkpoint.hpp"

namespace asma {
namespace {

namespace fs = std::filesystem;
using ad::Tensor;

nn::EncoderConfig small_config() {
    nn::EncoderConfig c;
    c.num_layers = 3;
    c.hidden_channels = 4;
    c.temporal_kernel = 3;
    c.embed_dim = 8;
    c.downsample_layers = {1};
    return c;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("asma_ckpt_" + name); }

Tensor sample_input() {
    Rng rng(99);
    Tensor x = Tensor::zeros({3, 3, 8, 25});
    for (auto& v : x.values()) v = static_cast<real>(rng.uniform(-1, 1));
    return x;
}

TEST(Checkpoint, RoundTripPreservesForwardExactly) {
    const auto g = build_ntu_graph();
    Rng a(1), b(2);
    nn::StgcnEncoder src(small_config(), *g, a);
    // Move the batch-norm running stats away from their initial values.
    src.forward(sample_input(), true);
    nn::StgcnEncoder dst(small_config(), *g, b);
    const auto path = temp_file("roundtrip");
    train::save_checkpoint(path, src.state("enc"), 0xABCDu, "k = v\n");
    const auto info = train::load_checkpoint(path, dst.state("enc"), 0xABCDu);
    EXPECT_EQ(info.config_text, "k = v\n");
    EXPECT_EQ(info.version, train::kCheckpointVersion);
    const auto ya = src.forward(sample_input(), false).tokens;
    const auto yb = dst.forward(sample_input(), false).tokens;
    ASSERT_EQ(ya.size(), yb.size());
    for (std::size_t i = 0; i < ya.size(); ++i) EXPECT_EQ(ya[i], yb[i]);
    fs::remove(path);
}

TEST(Checkpoint, SavingTwiceGivesIdenticalBytes) {
    const auto g = build_ntu_graph();
    Rng a(1);
    nn::StgcnEncoder enc(small_config(), *g, a);
    const auto p1 = temp_file("bytes1"), p2 = temp_file("bytes2");
    train::save_checkpoint(p1, enc.state(), 7, "");
    train::save_checkpoint(p2, enc.state(), 7, "");
    EXPECT_EQ(read_text_file(p1), read_text_file(p2));
    fs::remove(p1);
    fs::remove(p2);
}

TEST(Checkpoint, InfoListsBlobs) {
    Rng rng(3);
    nn::Linear lin(3, 4, rng);
    const auto path = temp_file("info");
    train::save_checkpoint(path, lin.state("head"), 1, "");
    const auto info = train::read_checkpoint_info(path);
    ASSERT_EQ(info.blobs.size(), 2u);
    EXPECT_EQ(info.blobs[0].name, "head.weight");
    EXPECT_EQ(info.blobs[0].shape, (ad::Shape{3, 4}));
    fs::remove(path);
}

ErrorCode load_error(const fs::path& path, const nn::StateRefs& state, std::optional<std::uint64_t> digest) {
    try {
        train::load_checkpoint(path, state, digest);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "load succeeded";
    return ErrorCode::Io;
}

TEST(Checkpoint, MismatchesAreRejected) {
    Rng rng(4);
    nn::Linear lin(3, 4, rng);
    const auto path = temp_file("mismatch");
    train::save_checkpoint(path, lin.state("head"), 11, "");
    EXPECT_EQ(load_error(path, lin.state("head"), 12), ErrorCode::CheckpointMismatch);
    EXPECT_EQ(load_error(path, lin.state("other"), std::nullopt), ErrorCode::CheckpointMismatch);
    nn::Linear wide(3, 5, rng);
    EXPECT_EQ(load_error(path, wide.state("head"), std::nullopt), ErrorCode::CheckpointMismatch);
    EXPECT_EQ(load_error(temp_file("absent"), lin.state("head"), std::nullopt), ErrorCode::Io);
    atomic_write_text(path, "not a checkpoint at all");
    EXPECT_EQ(load_error(path, lin.state("head"), std::nullopt), ErrorCode::CheckpointMismatch);
    fs::remove(path);
}

TEST(Checkpoint, TruncationIsDetected) {
    Rng rng(5);
    nn::Linear lin(3, 4, rng);
    const auto path = temp_file("trunc");
    train::save_checkpoint(path, lin.state(), 1, "");
    const auto bytes = read_text_file(path);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << bytes.substr(0, bytes.size() - 5);
    }
    EXPECT_THROW(train::load_checkpoint(path, lin.state()), Error);
    fs::remove(path);
}

}  // namespace
}  // namespace asma
