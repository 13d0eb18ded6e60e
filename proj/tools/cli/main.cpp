#include <cstdio>
#include <filesystem>

#include "common.hpp"

int main(int argc, char** argv) {
    using namespace asma::cli;
    CLI::App app{"Asymmetric spatio-temporal masking for skeleton self-supervised learning", "asma"};
    app.set_version_flag("--version", asma::kVersion);
    app.require_subcommand(1);
    Action action;
    register_data_commands(app, action);
    register_train_commands(app, action);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }
    try {
        action();
        return kOk;
    } catch (const asma::Error& e) {
        std::fprintf(stderr, "asma: %s\n", e.what());
        return exit_code_for(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "asma: %s\n", e.what());
        return kData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "asma: %s\n", e.what());
        return kData;
    }
}
