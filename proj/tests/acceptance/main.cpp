#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "criteria.hpp"

namespace {

struct Criterion {
    const char* title;
    double budget_s;  // runtime limit; 0 when none is set
    std::function<acceptance::Verdict(const std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    using namespace acceptance;
    const std::vector<Criterion> criteria{
        {"masking math exactness", 5, [](const std::string&) { return masking_math(); }},
        {"sampling fidelity", 30, [](const std::string&) { return sampling_fidelity(); }},
        {"loss correctness at optimum", 0, [](const std::string&) { return loss_optima(); }},
        {"gradient integrity", 120, [](const std::string&) { return gradient_integrity(); }},
        {"pipeline learning signal", 600, pipeline_signal},
        {"masking ordering", 1800, masking_ordering},
        {"distillation properties", 0, distillation},
        {"determinism and persistence", 0, determinism},
        {"format robustness", 0, [](const std::string&) { return format_robustness(); }},
    };

    CLI::App app{"Acceptance checks, one PASS/FAIL line per criterion", "asma_acceptance"};
    std::vector<int> selected;
    std::string preset;
    app.add_option("--criterion", selected, "Criterion numbers to run (default: all)")
        ->check(CLI::Range(1, static_cast<int>(criteria.size())));
    app.add_option("--preset", preset, "Config preset for the training criteria")->required()->check(CLI::ExistingFile);
    CLI11_PARSE(app, argc, argv);
    if (selected.empty())
        for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.push_back(i);

    int failures = 0;
    for (int n : selected) {
        const auto& c = criteria[n - 1];
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run(preset);
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0 && secs >= c.budget_s) {
            v.pass = false;
            v.detail += "; over the runtime limit";
        }
        std::printf("%s criterion %d (%s, %.1fs): %s\n", v.pass ? "PASS" : "FAIL", n, c.title, secs, v.detail.c_str());
        std::fflush(stdout);
        failures += !v.pass;
    }
    return failures == 0 ? 0 : 1;
}
