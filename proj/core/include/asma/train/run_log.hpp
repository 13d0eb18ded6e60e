#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "asma/precision.hpp"

ASMA_NAMESPACE_BEGIN
namespace train {

using Fields = std::vector<std::pair<std::string, double>>;

/// JSON-lines records of a run. metrics and steps hold only values that are a
/// function of (config, seed), so two identical runs produce identical bytes;
/// wall-clock times go to the separate timing stream.
class RunLog {
   public:
    explicit RunLog(bool echo = false) : echo_(echo) {}

    /// {"stage","epoch","lr", values...}
    void epoch(const std::string& stage, std::size_t epoch, double lr, const Fields& values, double wall_ms);
    /// {"stage","step", values...}
    void step(const std::string& stage, std::size_t step, const Fields& values);
    /// Free-form summary record appended to metrics, e.g. final accuracies.
    void summary(const std::string& stage, const Fields& values);

    const std::vector<std::string>& metrics() const { return metrics_; }
    const std::vector<std::string>& steps() const { return steps_; }
    const std::vector<std::string>& timing() const { return timing_; }

    /// Writes metrics.jsonl, steps.jsonl and timing.jsonl into `dir`.
    void write(const std::filesystem::path& dir) const;

   private:
    bool echo_;
    std::vector<std::string> metrics_, steps_, timing_;
};

}  // namespace train
ASMA_NAMESPACE_END
