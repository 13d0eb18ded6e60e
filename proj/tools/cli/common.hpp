#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asma/error.hpp"
#include "asma/nn/align.hpp"
#include "asma/nn/encoder.hpp"
#include "asma/train/config.hpp"
#include "asma/train/run_log.hpp"
#include "asma/train/stages.hpp"

namespace asma::cli {

namespace fs = std::filesystem;
using asma::Error;
using asma::ErrorCode;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Maps a library error to the documented exit code.
int exit_code_for(ErrorCode code);

/// Subcommand bodies run after parsing succeeds.
using Action = std::function<void()>;

/// Flags shared by every stage command.
struct ConfigFlags {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string data;
    bool align_norm = false;
    std::optional<double> student_tau;
    bool no_center = false;

    /// Adds -c, --set, --seed, --data, --align-norm, --student-tau, --no-center.
    void add_to(CLI::App& cmd);

    /// Defaults, then `fallback_config` or -c, then flags. -c wins over the fallback.
    train::TrainConfig resolve(const fs::path& fallback_config = {}) const;
};

/// Output directory handling: refuses a non-empty existing directory unless
/// `force`, then creates it.
void prepare_run_dir(const fs::path& dir, bool force);

/// run.json: command, stage, digests, seed, versions. No timestamps.
void write_run_record(const fs::path& dir, const std::string& command, const std::string& stage,
                      const train::TrainConfig& cfg);

/// Stage named in a run directory's run.json.
std::string read_run_stage(const fs::path& dir);

/// Writes config.cfg, run.json and the log files of a finished stage.
void finish_run(const fs::path& dir, const std::string& command, const std::string& stage,
                const train::TrainConfig& cfg, const train::RunLog& log);

inline constexpr const char* kModelFile = "model.ckpt";
inline constexpr const char* kConfigFile = "config.cfg";

/// Two encoders plus alignment head, as written by probe and finetune.
struct TeacherModel {
    nn::StgcnEncoder theta;
    nn::StgcnEncoder phi;
    nn::AlignHead head;
};

/// Student encoder plus readout, as written by distill.
struct StudentModel {
    nn::StgcnEncoder student;
    nn::Linear head;
};

nn::StateRefs teacher_state(const TeacherModel& m);
nn::StateRefs student_state(const StudentModel& m);

/// Freshly initialized shells to load into.
TeacherModel teacher_shell(const train::TrainConfig& cfg, const SkeletonGraph& graph, std::size_t classes);
StudentModel student_shell(const train::TrainConfig& cfg, const SkeletonGraph& graph, std::size_t classes);

/// Loads both encoders from a pretrain, probe or finetune run directory.
void load_encoders(const fs::path& run_dir, const train::TrainConfig& cfg, nn::StgcnEncoder& theta,
                   nn::StgcnEncoder& phi);

void save_model(const fs::path& dir, const nn::StateRefs& state, const train::TrainConfig& cfg);

/// Test-split logits of the model stored in a probe, finetune or distill run.
ad::Tensor run_logits(const fs::path& run_dir, const train::TrainConfig& cfg, const train::DataBundle& data);

/// Config stored in a run directory.
train::TrainConfig run_config(const fs::path& run_dir);

/// Parses "a,b,c" with `parse` applied to each item.
template <class T, class F>
std::vector<T> parse_list(const std::string& text, F parse) {
    std::vector<T> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) out.push_back(parse(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void register_data_commands(CLI::App& app, Action& action);
void register_train_commands(CLI::App& app, Action& action);

}  // namespace asma::cli
