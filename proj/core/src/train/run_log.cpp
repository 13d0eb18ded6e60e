#include "asma/train/run_log.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "asma/io_util.hpp"

ASMA_NAMESPACE_BEGIN
namespace train {

namespace {

using ojson = nlohmann::ordered_json;

void put(ojson& j, const Fields& values) {
    for (const auto& [k, v] : values) j[k] = v;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

}  // namespace

void RunLog::epoch(const std::string& stage, std::size_t epoch, double lr, const Fields& values, double wall_ms) {
    ojson j;
    j["stage"] = stage;
    j["epoch"] = epoch;
    j["lr"] = lr;
    put(j, values);
    metrics_.push_back(j.dump());
    ojson t;
    t["stage"] = stage;
    t["epoch"] = epoch;
    t["wall_ms"] = wall_ms;
    timing_.push_back(t.dump());
    if (echo_) std::fprintf(stderr, "%s\n", metrics_.back().c_str());
}

void RunLog::step(const std::string& stage, std::size_t step, const Fields& values) {
    ojson j;
    j["stage"] = stage;
    j["step"] = step;
    put(j, values);
    steps_.push_back(j.dump());
}

void RunLog::summary(const std::string& stage, const Fields& values) {
    ojson j;
    j["stage"] = stage;
    j["summary"] = true;
    put(j, values);
    metrics_.push_back(j.dump());
    if (echo_) std::fprintf(stderr, "%s\n", metrics_.back().c_str());
}

void RunLog::write(const std::filesystem::path& dir) const {
    atomic_write_text(dir / "metrics.jsonl", join_lines(metrics_));
    atomic_write_text(dir / "steps.jsonl", join_lines(steps_));
    atomic_write_text(dir / "timing.jsonl", join_lines(timing_));
}

}  // namespace train
ASMA_NAMESPACE_END
