#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#include "asma/error.hpp"
#include "asma/io_util.hpp"
#include "asma/nn/distill.hpp"
#include "asma/ntu_format.hpp"
#include "asma/train/checkpoint.hpp"
#include "asma/train/stages.hpp"
#include "criteria.hpp"

namespace acceptance {
namespace {

namespace fs = std::filesystem;
using namespace asma;
using namespace asma::train;

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

std::string fixed(double v, int digits = 3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

TrainConfig preset_for(const std::string& preset, std::uint64_t seed) {
    TrainConfig cfg = load_config(preset);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

}  // namespace

Verdict pipeline_signal(const std::string& preset) {
    std::vector<double> reduction, probe, random;
    std::ostringstream detail;
    const auto data = prepare_data(load_config(preset).data);
    for (auto seed : kSeeds) {
        const TrainConfig cfg = preset_for(preset, seed);
        const auto pre = pretrain(cfg, data.train);
        // Baseline is the first-epoch mean, which already includes some
        // progress, so the reduction is measured conservatively.
        reduction.push_back(1.0 - pre.epoch_loss.back() / pre.epoch_loss.front());
        probe.push_back(linear_probe(cfg, pre.encoders[0], pre.encoders[1], data).test_acc);
        const auto e0 = make_encoder(cfg, 0, *data.graph), e1 = make_encoder(cfg, 1, *data.graph);
        random.push_back(linear_probe(cfg, e0, e1, data).test_acc);
        detail << " seed " << seed << ": reduction " << fixed(reduction.back()) << " probe " << fixed(probe.back())
               << " random " << fixed(random.back()) << ";";
    }
    std::size_t better = 0;
    for (std::size_t i = 0; i < kSeeds.size(); ++i) better += probe[i] > random[i];
    const bool pass = median3(reduction) >= 0.5 && median3(probe) >= 0.9 && better == kSeeds.size();
    return {pass, "median reduction " + fixed(median3(reduction)) + " (>= 0.5), median probe " + fixed(median3(probe)) +
                      " (>= 0.9), pretrained > random in " + std::to_string(better) + "/3;" + detail.str()};
}

Verdict masking_ordering(const std::string& preset) {
    const TrainConfig cfg = preset_for(preset, kSeeds[0]);
    const auto data = prepare_data(cfg.data);
    auto cell = [&](SpatialMode s, TemporalMode t) {
        std::vector<double> acc;
        for (const auto& row : ablation_grid(cfg, data, {s}, {t}, kSeeds, worker_count())) acc.push_back(row.probe_acc);
        return acc;
    };
    const auto sym = cell(SpatialMode::LDSM, TemporalMode::LMTM);
    const auto low_high = cell(SpatialMode::LDSM, TemporalMode::HMTM);
    const auto high_low = cell(SpatialMode::HDSM, TemporalMode::LMTM);
    std::size_t wins_lh = 0, wins_hl = 0;
    std::ostringstream detail;
    for (std::size_t i = 0; i < kSeeds.size(); ++i) {
        wins_lh += low_high[i] > sym[i];
        wins_hl += high_low[i] > sym[i];
        detail << " seed " << kSeeds[i] << ": ldsm+lmtm " << fixed(sym[i]) << " ldsm+hmtm " << fixed(low_high[i])
               << " hdsm+lmtm " << fixed(high_low[i]) << ";";
    }
    return {wins_lh >= 2 && wins_hl >= 2, "ldsm+hmtm wins " + std::to_string(wins_lh) + "/3, hdsm+lmtm wins " +
                                              std::to_string(wins_hl) + "/3 (need >= 2 each);" + detail.str()};
}

Verdict distillation(const std::string& preset) {
    std::size_t wins = 0;
    std::ostringstream detail;
    bool params_ok = true;
    const auto data = prepare_data(load_config(preset).data);
    for (auto seed : kSeeds) {
        TrainConfig cfg = preset_for(preset, seed);
        cfg.distill_loss.teacher = nn::TeacherKind::LinearProbed;
        const auto pre = pretrain(cfg, data.train);
        const auto probe = linear_probe(cfg, pre.encoders[0], pre.encoders[1], data);
        const auto d = distill_stage(cfg, pre.encoders[0], pre.encoders[1], probe.head, data);
        wins += d.student_acc >= d.teacher_acc;
        params_ok = params_ok && d.student_params < 0.2 * static_cast<double>(d.teacher_params);
        detail << " seed " << seed << ": student " << fixed(d.student_acc) << " teacher " << fixed(d.teacher_acc)
               << " params " << d.student_params << "/" << d.teacher_params << ";";
    }

    bool argmax_ok = true;
    Rng rng(77);
    for (int n = 0; n < 200; ++n) {
        std::vector<real> v(4 * 7);
        for (auto& x : v) x = static_cast<real>(rng.uniform(-10, 10));
        const auto logits = ad::Tensor::from({4, 7}, v);
        const auto want = nn::argmax_rows(logits);
        for (double tau : {0.5, 1.0, 2.0, 8.0, 32.0}) argmax_ok = argmax_ok && nn::argmax_rows(nn::soften(logits, tau)) == want;
    }
    return {wins >= 2 && argmax_ok && params_ok,
            "student >= teacher in " + std::to_string(wins) + "/3 (need >= 2), soften argmax " +
                (argmax_ok ? "preserved" : "changed") + ", student params < 20% of teacher: " +
                (params_ok ? "yes" : "no") + ";" + detail.str()};
}

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + ASMA_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Names of differing files, skipping wall-clock timings.
std::vector<std::string> differing_files(const fs::path& a, const fs::path& b) {
    std::vector<std::string> out;
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename().string();
        if (name == "timing.jsonl") continue;
        ++compared;
        if (!fs::exists(b / name) || read_text_file(entry.path()) != read_text_file(b / name)) out.push_back(name);
    }
    if (compared == 0) out.push_back("(no files)");
    return out;
}

}  // namespace

Verdict determinism(const std::string& preset) {
    const auto root = fs::temp_directory_path() / "asma_accept_determinism";
    fs::remove_all(root);
    const std::string common =
        " -c \"" + preset + "\" --set pretrain.epochs=3 --set pretrain.warmup=1 --set probe.epochs=3 --set probe.warmup=1";
    std::vector<std::string> diffs;
    bool ran = true;
    for (const char* run : {"a", "b"}) {
        const auto pre = root / run / "pretrain", probe = root / run / "probe";
        ran = ran && run_cli("pretrain" + common + " -o \"" + pre.string() + "\"") == 0;
        ran = ran && run_cli("probe" + common + " --from \"" + pre.string() + "\" -o \"" + probe.string() + "\"") == 0;
    }
    if (ran) {
        for (const char* stage : {"pretrain", "probe"})
            for (const auto& f : differing_files(root / "a" / stage, root / "b" / stage))
                diffs.push_back(std::string(stage) + "/" + f);
    }

    // Checkpoint round trip of the full teacher.
    const TrainConfig cfg = preset_for(preset, 1);
    const auto data = prepare_data(cfg.data);
    auto src_theta = make_encoder(cfg, 0, *data.graph), src_phi = make_encoder(cfg, 1, *data.graph);
    Rng head_rng(5);
    nn::AlignHead src_head({cfg.align_heads, cfg.encoder.embed_dim, data.num_classes, cfg.align_norm}, head_rng);
    // One training-mode pass moves the batch-norm statistics off their defaults.
    {
        ad::NoGradGuard g;
        const std::vector<SkeletonSequence> few(data.train.items.begin(), data.train.items.begin() + 8);
        src_theta.forward(nn::stack_batch(few), true);
        src_phi.forward(nn::stack_batch(few), true);
    }
    auto collect = [](const nn::StgcnEncoder& a, const nn::StgcnEncoder& b, const nn::AlignHead& h) {
        nn::StateRefs s = a.state("theta");
        s.append(b.state("phi"));
        s.append(h.state("align"));
        return s;
    };
    const auto path = root / "teacher.ckpt";
    fs::create_directories(root);
    save_checkpoint(path, collect(src_theta, src_phi, src_head), model_digest(cfg), config_text(cfg));
    const TrainConfig other = preset_for(preset, 9);
    auto dst_theta = make_encoder(other, 0, *data.graph), dst_phi = make_encoder(other, 1, *data.graph);
    Rng other_rng(6);
    nn::AlignHead dst_head({cfg.align_heads, cfg.encoder.embed_dim, data.num_classes, cfg.align_norm}, other_rng);
    load_checkpoint(path, collect(dst_theta, dst_phi, dst_head), model_digest(cfg));
    const auto la = teacher_logits(src_theta, src_phi, src_head, data.test);
    const auto lb = teacher_logits(dst_theta, dst_phi, dst_head, data.test);
    bool exact = la.size() == lb.size();
    for (std::size_t i = 0; exact && i < la.size(); ++i) exact = la[i] == lb[i];
    fs::remove_all(root);

    std::string why = ran ? (diffs.empty() ? "metrics and checkpoints identical across runs" : "differing:") : "CLI run failed";
    for (const auto& d : diffs) why += " " + d;
    return {ran && diffs.empty() && exact, why + "; checkpoint round trip " + (exact ? "exact" : "NOT exact")};
}

Verdict format_robustness() {
    const auto g = build_ntu_graph();
    const std::string golden = read_text_file(std::string(ASMA_TEST_DATA_DIR) + "/golden.skeleton");
    bool golden_ok = false;
    try {
        const auto bodies = parse_ntu_skeleton(golden, g);
        golden_ok = bodies.size() == 2 && bodies[0].frames() == 3 && bodies[0].at(0, 0, 4) == real(0.4) &&
                    bodies[1].at(0, 1, 0) == real(5.0);
    } catch (const Error&) {
    }

    auto with_line = [&](std::size_t n, const std::string& line) {
        std::istringstream in(golden);
        std::ostringstream out;
        std::string l;
        for (std::size_t i = 0; std::getline(in, l); ++i) out << (i == n ? line : l) << '\n';
        return out.str();
    };
    struct Corruption {
        std::string name;
        std::string text;
        ErrorCode expected;
    };
    const std::vector<Corruption> cases{
        {"truncation", golden.substr(0, golden.size() / 2), ErrorCode::MalformedRecord},
        {"field-count", with_line(4, "0.1 0.2"), ErrorCode::MalformedRecord},
        {"non-numeric", with_line(4, "0.1 abc 0.3 1 2 3 4 5 6 7 8 2"), ErrorCode::NonNumericField},
        {"empty", "", ErrorCode::EmptyFile},
        {"joint-count", with_line(3, "24"), ErrorCode::MalformedRecord},
    };
    std::string detail = std::string("golden ") + (golden_ok ? "ok" : "REJECTED");
    bool all = golden_ok;
    for (const auto& c : cases) {
        std::string got = "accepted";
        try {
            parse_ntu_skeleton(c.text, g);
        } catch (const Error& e) {
            got = error_code_name(e.code());
        }
        const bool ok = got == error_code_name(c.expected);
        all = all && ok;
        detail += ", " + c.name + " -> " + got;
    }
    return {all, detail};
}

}  // namespace acceptance
