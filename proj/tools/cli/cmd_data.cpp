#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "asma/dataset.hpp"
#include "asma/io_util.hpp"
#include "asma/masking.hpp"
#include "asma/synthetic.hpp"
#include "asma/train/checkpoint.hpp"
#include "common.hpp"

namespace asma::cli {

namespace {

using train::TrainConfig;

// Dataset named on the command line, or the one the config describes.
Dataset dataset_for(const std::string& path, const TrainConfig& cfg, const GraphPtr& graph) {
    Dataset d;
    if (path.empty() && cfg.data.path.empty()) {
        d.items = generate_synthetic(cfg.data.classes, cfg.data.per_class, cfg.data.frames, graph, cfg.data.seed,
                                     cfg.data.synth);
    } else {
        d = load_dataset(path.empty() ? fs::path(cfg.data.path) : fs::path(path), graph, cfg.data.frames,
                         cfg.data.all_bodies);
    }
    d.validate();
    return d;
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        atomic_write_text(out, text);
    }
}

void add_stats(CLI::App& data, Action& action) {
    auto* cmd = data.add_subcommand("stats", "Per-joint degree and mean motion intensity as CSV");
    auto path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto flags = std::make_shared<ConfigFlags>();
    cmd->add_option("path", *path, "Dataset (cache, .skeleton file or directory); default: the configured data");
    cmd->add_option("-o,--out", *out, "CSV file (default: stdout)");
    flags->add_to(*cmd);
    cmd->callback([=, &action] {
        action = [=] {
            const auto cfg = flags->resolve();
            const auto graph = build_ntu_graph();
            const auto d = dataset_for(*path, cfg, graph);
            const std::size_t C = d.channels(), T = d.frames(), V = d.joints();
            std::vector<double> motion(V, 0.0);
            for (const auto& x : d.items)
                for (std::size_t v = 0; v < V; ++v)
                    for (std::size_t t = 0; t + 1 < T; ++t) {
                        double s = 0;
                        for (std::size_t c = 0; c < C; ++c) s += std::abs(double(x.at(c, t + 1, v)) - x.at(c, t, v));
                        motion[v] += s / static_cast<double>(C);
                    }
            const double denom = static_cast<double>(d.size()) * static_cast<double>(T > 1 ? T - 1 : 1);
            std::ostringstream csv;
            csv << "joint_index,degree,mean_motion\n";
            for (std::size_t v = 0; v < V; ++v) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.9g", motion[v] / denom);
                csv << v << ',' << graph->degree(v) << ',' << buf << '\n';
            }
            emit(*out, csv.str());
            std::fprintf(stderr, "%zu sequences, %zu classes, %zu x %zu x %zu\n", d.size(), d.num_classes(), C, T, V);
        };
    });
}

void add_synth(CLI::App& data, Action& action) {
    auto* cmd = data.add_subcommand("synth", "Generate the labelled synthetic action set as a cache file");
    struct Opts {
        std::size_t classes = 4, per_class = 50, frames = 50;
        std::uint64_t seed = 1;
        std::string out;
        bool force = false;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--classes", o->classes, "Number of classes")->capture_default_str();
    cmd->add_option("--per-class", o->per_class, "Sequences per class")->capture_default_str();
    cmd->add_option("--frames", o->frames, "Frames per sequence")->capture_default_str();
    cmd->add_option("--seed", o->seed, "Generator seed")->capture_default_str();
    cmd->add_option("-o,--out", o->out, "Output directory (receives data.cache)")->required();
    cmd->add_flag("--force", o->force, "Overwrite an existing output directory");
    cmd->callback([o, &action] {
        action = [o] {
            if (o->classes < 1 || o->per_class < 1 || o->frames < 2)
                throw Error(ErrorCode::InvalidArgument, "need classes >= 1, per-class >= 1, frames >= 2");
            prepare_run_dir(o->out, o->force);
            Dataset d;
            d.items = generate_synthetic(o->classes, o->per_class, o->frames, build_ntu_graph(), o->seed);
            const fs::path path = fs::path(o->out) / kCacheFileName;
            save_cache(path, d);
            std::printf("wrote %zu sequences to %s\n", d.size(), path.string().c_str());
        };
    });
}

void add_cache(CLI::App& data, Action& action) {
    auto* cmd = data.add_subcommand("cache", "Convert .skeleton files into a cache file");
    struct Opts {
        std::string input, out;
        std::size_t frames = 50;
        bool first_body = false, force = false;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("input", o->input, ".skeleton file or directory")->required()->check(CLI::ExistingPath);
    cmd->add_option("-o,--out", o->out, "Output directory (receives data.cache)")->required();
    cmd->add_option("--frames", o->frames, "Resample every sequence to this many frames")->capture_default_str();
    cmd->add_flag("--first-body", o->first_body, "Keep only the first body of each file");
    cmd->add_flag("--force", o->force, "Overwrite an existing output directory");
    cmd->callback([o, &action] {
        action = [o] {
            const auto d = load_dataset(o->input, build_ntu_graph(), o->frames, !o->first_body);
            d.validate();
            prepare_run_dir(o->out, o->force);
            const fs::path path = fs::path(o->out) / kCacheFileName;
            save_cache(path, d);
            std::printf("wrote %zu sequences to %s\n", d.size(), path.string().c_str());
        };
    });
}

void add_mask_preview(CLI::App& app, Action& action) {
    auto* mask = app.add_subcommand("mask", "Masking tools");
    mask->require_subcommand(1);
    auto* cmd = mask->add_subcommand("preview", "Chosen joint or frame indices per sequence as JSON lines");
    struct Opts {
        std::string mode, path, out;
        std::size_t n = 9, k = 10, limit = 0;
    };
    auto o = std::make_shared<Opts>();
    auto flags = std::make_shared<ConfigFlags>();
    cmd->add_option("--mode", o->mode, "hdsm | ldsm | hmtm | lmtm")
        ->required()
        ->check(CLI::IsMember({"hdsm", "ldsm", "hmtm", "lmtm"}));
    cmd->add_option("--n", o->n, "Joints to mask")->capture_default_str();
    cmd->add_option("--k", o->k, "Frames to mask")->capture_default_str();
    cmd->add_option("--limit", o->limit, "Only the first N sequences (0: all)");
    cmd->add_option("path", o->path, "Dataset; default: the configured data");
    cmd->add_option("-o,--out", o->out, "JSON-lines file (default: stdout)");
    flags->add_to(*cmd);
    cmd->callback([o, flags, &action] {
        action = [o, flags] {
            auto cfg = flags->resolve();
            // Joint draws for sequence i use derive_seed(seed, i).
            const std::uint64_t seed = cfg.seed;
            const auto graph = build_ntu_graph();
            const auto d = dataset_for(o->path, cfg, graph);
            const bool spatial = o->mode == "hdsm" || o->mode == "ldsm";
            MaskSpec spec{o->n, o->k, SpatialMode::HDSM, TemporalMode::HMTM};
            if (spatial) spec.spatial = parse_spatial_mode(o->mode);
            else spec.temporal = parse_temporal_mode(o->mode);
            spec.validate(d.joints(), d.frames());
            const std::size_t count = o->limit ? std::min(o->limit, d.size()) : d.size();
            std::string text;
            for (std::size_t i = 0; i < count; ++i) {
                Rng rng(derive_seed(seed, i));
                nlohmann::ordered_json j;
                j["index"] = i;
                j["label"] = d.items[i].label() ? *d.items[i].label() : -1;
                j["mode"] = o->mode;
                if (spatial) j["joints"] = draw_joint_mask(*graph, spec, rng);
                else j["frames"] = draw_frame_mask(d.items[i], spec, rng);
                text += j.dump() + "\n";
            }
            emit(o->out, text);
        };
    });
}

bool is_buffer(const std::string& name) {
    auto ends = [&](const std::string& suffix) {
        return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    return ends("running_mean") || ends("running_var");
}

void add_model_info(CLI::App& app, Action& action) {
    auto* model = app.add_subcommand("model", "Model inspection");
    model->require_subcommand(1);
    auto* cmd = model->add_subcommand("info", "Parameter and FLOP counts of a checkpoint or a config");
    auto ckpt = std::make_shared<std::string>();
    auto flags = std::make_shared<ConfigFlags>();
    cmd->add_option("checkpoint", *ckpt, "Checkpoint file or run directory")->check(CLI::ExistingPath);
    flags->add_to(*cmd);
    cmd->callback([=, &action] {
        action = [=] {
            const std::size_t joints = build_ntu_graph()->num_joints();
            if (ckpt->empty()) {
                const auto cfg = flags->resolve();
                const auto graph = build_ntu_graph();
                auto teacher = teacher_shell(cfg, *graph, cfg.data.classes);
                auto student = student_shell(cfg, *graph, cfg.data.classes);
                const std::size_t enc = nn::count_params(teacher.theta);
                std::printf("encoder params: %zu (x2)\n", enc);
                std::printf("align head params: %zu\n", nn::count_params(teacher.head));
                std::printf("teacher composite params: %zu\n", nn::count_params(teacher_state(teacher)));
                std::printf("student params: %zu\n", nn::count_params(student_state(student)));
                std::printf("encoder flops/sample: %zu\n", nn::count_flops(cfg.encoder, cfg.data.frames, joints));
                std::printf("student flops/sample: %zu\n", nn::count_flops(cfg.student, cfg.data.frames, joints));
                return;
            }
            fs::path path = *ckpt;
            if (fs::is_directory(path)) path /= kModelFile;
            const auto info = train::read_checkpoint_info(path);
            TrainConfig cfg;
            train::apply_config_text(cfg, info.config_text, path.string());
            std::map<std::string, std::size_t> params;
            std::size_t total = 0, buffers = 0;
            for (const auto& b : info.blobs) {
                const std::size_t n = ad::shape_size(b.shape);
                if (is_buffer(b.name)) {
                    buffers += n;
                    continue;
                }
                params[b.name.substr(0, b.name.find('.'))] += n;
                total += n;
            }
            std::printf("checkpoint: %s (version %u, digest %s)\n", path.string().c_str(), unsigned(info.version),
                        hex64(info.digest).c_str());
            for (const auto& [prefix, n] : params) std::printf("%s params: %zu\n", prefix.c_str(), n);
            std::printf("total params: %zu\n", total);
            std::printf("buffer values: %zu\n", buffers);
            if (params.count("theta"))
                std::printf("encoder flops/sample: %zu\n", nn::count_flops(cfg.encoder, cfg.data.frames, joints));
            if (params.count("student"))
                std::printf("student flops/sample: %zu\n", nn::count_flops(cfg.student, cfg.data.frames, joints));
        };
    });
}

}  // namespace

void register_data_commands(CLI::App& app, Action& action) {
    auto* data = app.add_subcommand("data", "Dataset tools");
    data->require_subcommand(1);
    add_stats(*data, action);
    add_synth(*data, action);
    add_cache(*data, action);
    add_mask_preview(app, action);
    add_model_info(app, action);
}

}  // namespace asma::cli
