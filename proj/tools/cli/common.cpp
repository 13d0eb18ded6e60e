#include "common.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "asma/dataset.hpp"
#include "asma/io_util.hpp"
#include "asma/train/checkpoint.hpp"

namespace asma::cli {

using train::TrainConfig;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
            return kUsage;
        case ErrorCode::NonFiniteDetected:
            return kNumeric;
        default:
            return kData;
    }
}

void ConfigFlags::add_to(CLI::App& cmd) {
    cmd.add_option("-c,--config", config, "Config file (key = value lines)")->check(CLI::ExistingFile);
    cmd.add_option("--set", sets, "Override one config key, key=value (repeatable)");
    cmd.add_option("--seed", seed, "Training seed");
    cmd.add_option("--data", data, "Dataset: cache file, .skeleton file or directory");
    cmd.add_flag("--align-norm", align_norm, "Layer norm after the bidirectional sum in the alignment head");
    cmd.add_option("--student-tau", student_tau, "Student-side distillation temperature (0: same as tau)");
    cmd.add_flag("--no-center", no_center, "Skip column centering in the cross-correlation");
}

TrainConfig ConfigFlags::resolve(const fs::path& fallback_config) const {
    TrainConfig cfg;
    if (!config.empty()) {
        cfg = train::load_config(config);
    } else if (!fallback_config.empty()) {
        cfg = train::load_config(fallback_config);
    }
    for (const auto& s : sets) train::apply_override(cfg, s);
    if (seed) cfg.seed = *seed;
    if (!data.empty()) cfg.data.path = data;
    if (align_norm) cfg.align_norm = true;
    if (student_tau) train::set_config_value(cfg, "distill.student_tau", std::to_string(*student_tau));
    if (no_center) cfg.loss.center = false;
    cfg.validate();
    return cfg;
}

void prepare_run_dir(const fs::path& dir, bool force) {
    if (dir.empty()) throw Error(ErrorCode::InvalidArgument, "an output directory (-o) is required");
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw Error(ErrorCode::InvalidArgument, dir.string() + " exists and is not a directory");
        if (!fs::is_empty(dir) && !force)
            throw Error(ErrorCode::InvalidArgument, dir.string() + " already holds a run; pass --force to overwrite");
    }
    fs::create_directories(dir);
}

void write_run_record(const fs::path& dir, const std::string& command, const std::string& stage,
                      const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["stage"] = stage;
    j["config_digest"] = hex64(train::config_digest(cfg));
    j["model_digest"] = hex64(train::model_digest(cfg));
    j["seed"] = cfg.seed;
    j["data_seed"] = cfg.data.seed;
    j["stream"] = stream_name(cfg.data.stream);
    j["version"] = kVersion;
    j["precision"] = precision_name();
    j["checkpoint_version"] = train::kCheckpointVersion;
    j["cache_version"] = kCacheVersion;
    atomic_write_text(dir / "run.json", j.dump(2) + "\n");
}

std::string read_run_stage(const fs::path& dir) {
    const auto path = dir / "run.json";
    if (!fs::exists(path)) throw Error(ErrorCode::Io, "no run.json in " + dir.string());
    try {
        const auto j = nlohmann::json::parse(read_text_file(path));
        return j.at("stage").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
    }
}

void finish_run(const fs::path& dir, const std::string& command, const std::string& stage, const TrainConfig& cfg,
                const train::RunLog& log) {
    atomic_write_text(dir / kConfigFile, train::config_text(cfg));
    log.write(dir);
    write_run_record(dir, command, stage, cfg);
}

nn::StateRefs teacher_state(const TeacherModel& m) {
    nn::StateRefs s;
    m.theta.collect(s, "theta");
    m.phi.collect(s, "phi");
    m.head.collect(s, "align");
    return s;
}

nn::StateRefs student_state(const StudentModel& m) {
    nn::StateRefs s;
    m.student.collect(s, "student");
    m.head.collect(s, "student_head");
    return s;
}

TeacherModel teacher_shell(const TrainConfig& cfg, const SkeletonGraph& graph, std::size_t classes) {
    Rng rng(train::init_seed(cfg.seed, train::InitSlot::Align));
    return {train::make_encoder(cfg, 0, graph), train::make_encoder(cfg, 1, graph),
            nn::AlignHead({cfg.align_heads, cfg.encoder.embed_dim, classes, cfg.align_norm}, rng)};
}

StudentModel student_shell(const TrainConfig& cfg, const SkeletonGraph& graph, std::size_t classes) {
    Rng srng(train::init_seed(cfg.seed, train::InitSlot::Student));
    Rng hrng(train::init_seed(cfg.seed, train::InitSlot::StudentHead));
    return {nn::StgcnEncoder(cfg.student, graph, srng), nn::Linear(cfg.student.embed_dim, classes, hrng)};
}

void load_encoders(const fs::path& run_dir, const TrainConfig& cfg, nn::StgcnEncoder& theta, nn::StgcnEncoder& phi) {
    nn::StateRefs s;
    theta.collect(s, "theta");
    phi.collect(s, "phi");
    train::load_checkpoint(run_dir / kModelFile, s, train::model_digest(cfg));
}

void save_model(const fs::path& dir, const nn::StateRefs& state, const TrainConfig& cfg) {
    train::save_checkpoint(dir / kModelFile, state, train::model_digest(cfg), train::config_text(cfg));
}

TrainConfig run_config(const fs::path& run_dir) {
    const auto path = run_dir / kConfigFile;
    if (!fs::exists(path)) throw Error(ErrorCode::Io, "no " + std::string(kConfigFile) + " in " + run_dir.string());
    return train::load_config(path);
}

ad::Tensor run_logits(const fs::path& run_dir, const TrainConfig& cfg, const train::DataBundle& data) {
    const std::string stage = read_run_stage(run_dir);
    if (stage == "probe" || stage == "finetune") {
        auto m = teacher_shell(cfg, *data.graph, data.num_classes);
        train::load_checkpoint(run_dir / kModelFile, teacher_state(m), train::model_digest(cfg));
        return train::teacher_logits(m.theta, m.phi, m.head, data.test);
    }
    if (stage == "distill") {
        auto m = student_shell(cfg, *data.graph, data.num_classes);
        train::load_checkpoint(run_dir / kModelFile, student_state(m), train::model_digest(cfg));
        const auto enc = train::encode(m.student, data.test);
        ad::NoGradGuard g;
        return m.head.forward(enc.pooled);
    }
    throw Error(ErrorCode::InvalidArgument, run_dir.string() + " holds a '" + stage +
                                                "' run; evaluation needs a probe, finetune or distill run");
}

}  // namespace asma::cli
