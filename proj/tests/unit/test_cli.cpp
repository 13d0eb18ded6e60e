#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "asma/dataset.hpp"
#include "asma/io_util.hpp"

#ifdef ASMA_CLI_PATH

namespace asma {
namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome run(const std::string& args) {
    const auto log = fs::temp_directory_path() / "asma_cli_test.out";
    const std::string cmd = std::string("\"") + ASMA_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = fs::exists(log) ? read_text_file(log) : "";
    return o;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("asma_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

// Tiny schedule so the training commands finish in seconds.
const char* kTiny =
    "--set data.classes=3 --set data.per_class=6 --set data.frames=12 --set encoder.hidden=4 "
    "--set encoder.embed_dim=16 --set encoder.widen=false --set encoder.layers=3 --set encoder.downsample=1 --set projector.hidden=16 "
    "--set projector.out=16 --set mask.frames=3 --set pretrain.epochs=1 --set pretrain.batch=8 "
    "--set pretrain.warmup=0 --set probe.epochs=1 --set probe.batch=8 --set probe.warmup=0";

TEST(Cli, HelpAndUsage) {
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("no-such-command").code, 1);
    const auto help = run("pretrain --help");
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("--out"), std::string::npos);
}

TEST(Cli, SynthWritesCacheAndRefusesOverwrite) {
    const auto dir = scratch("synth");
    const auto first = run("data synth --classes 4 --per-class 50 --frames 16 -o \"" + dir.string() + "\"");
    ASSERT_EQ(first.code, 0) << first.out;
    EXPECT_EQ(load_cache(dir / kCacheFileName, build_ntu_graph()).size(), 200u);
    EXPECT_EQ(run("data synth -o \"" + dir.string() + "\"").code, 1);
    EXPECT_EQ(run("data synth --force --per-class 2 -o \"" + dir.string() + "\"").code, 0);
    EXPECT_EQ(load_cache(dir / kCacheFileName, build_ntu_graph()).size(), 8u);
    fs::remove_all(dir);
}

TEST(Cli, DataErrorsExitWithTwo) {
    const auto dir = scratch("bad");
    fs::create_directories(dir);
    atomic_write_text(dir / "x.skeleton", "5\n0\n");
    const auto r = run("data stats \"" + dir.string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("x.skeleton"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, BadConfigExitsWithOne) {
    EXPECT_EQ(run("pretrain --set nope=1 -o x").code, 1);
    EXPECT_EQ(run("pretrain --set pretrain.batch=1 -o x").code, 1);
}

TEST(Cli, StatsAndMaskPreview) {
    const auto stats = run("data stats --set data.classes=2 --set data.per_class=2 --set data.frames=16");
    ASSERT_EQ(stats.code, 0) << stats.out;
    EXPECT_NE(stats.out.find("joint_index,degree,mean_motion\n"), std::string::npos);
    const auto preview = run("mask preview --mode hdsm --n 3 --limit 2 --set data.classes=2 --set data.per_class=2");
    ASSERT_EQ(preview.code, 0) << preview.out;
    EXPECT_NE(preview.out.find("\"joints\""), std::string::npos);
}

TEST(Cli, PretrainProbeEvalChain) {
    const auto pre = scratch("pre"), probe = scratch("probe");
    const auto p = run(std::string("pretrain ") + kTiny + " -o \"" + pre.string() + "\"");
    ASSERT_EQ(p.code, 0) << p.out;
    EXPECT_TRUE(fs::exists(pre / "run.json"));
    const auto q = run(std::string("probe ") + kTiny + " --from \"" + pre.string() + "\" -o \"" + probe.string() + "\"");
    ASSERT_EQ(q.code, 0) << q.out;
    const auto e = run("eval \"" + probe.string() + "\"");
    EXPECT_EQ(e.code, 0) << e.out;
    // A checkpoint from different shapes is refused.
    const auto mismatch = run(std::string("probe ") + kTiny + " --set encoder.hidden=6 --from \"" + pre.string() +
                              "\" -o \"" + scratch("probe2").string() + "\"");
    EXPECT_EQ(mismatch.code, 2);
    fs::remove_all(pre);
    fs::remove_all(probe);
    fs::remove_all(scratch("probe2"));
}

}  // namespace
}  // namespace asma

#endif
