#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "asma/io_util.hpp"
#include "asma/train/checkpoint.hpp"
#include "common.hpp"

namespace asma::cli {

namespace {

using train::TrainConfig;

struct StageOpts {
    ConfigFlags flags;
    std::string out;
    std::string from;
    bool force = false;
};

std::shared_ptr<StageOpts> stage_options(CLI::App& cmd, const char* from_flag, const char* from_help) {
    auto o = std::make_shared<StageOpts>();
    o->flags.add_to(cmd);
    cmd.add_option("-o,--out", o->out, "Run directory")->required();
    cmd.add_flag("--force", o->force, "Overwrite an existing run directory");
    if (from_flag) cmd.add_option(from_flag, o->from, from_help)->check(CLI::ExistingDirectory);
    return o;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

nn::StateRefs pretrain_state(const train::PretrainResult& r) {
    nn::StateRefs s;
    r.encoders[0].collect(s, "theta");
    r.encoders[1].collect(s, "phi");
    r.projectors[0]->collect(s, r.projectors[0] == r.projectors[1] ? "projector" : "projector.theta");
    if (r.projectors[1] != r.projectors[0]) r.projectors[1]->collect(s, "projector.phi");
    return s;
}

train::Fields pretrain_summary(const train::PretrainResult& r) {
    const double first = r.epoch_loss.front(), last = r.epoch_loss.back();
    return {{"first_loss", first}, {"final_loss", last}, {"reduction", first > 0 ? 1.0 - last / first : 0.0}};
}

void add_pretrain(CLI::App& app, Action& action) {
    auto* cmd = app.add_subcommand("pretrain", "Self-supervised pretraining of both encoders");
    auto o = stage_options(*cmd, nullptr, nullptr);
    cmd->callback([o, &action] {
        action = [o] {
            const auto cfg = o->flags.resolve();
            prepare_run_dir(o->out, o->force);
            const auto data = train::prepare_data(cfg.data);
            train::RunLog log(true);
            const auto res = train::pretrain(cfg, data.train, &log);
            log.summary("pretrain", pretrain_summary(res));
            save_model(o->out, pretrain_state(res), cfg);
            finish_run(o->out, "pretrain", "pretrain", cfg, log);
            std::printf("pretrain loss %s -> %s\n", fmt(res.epoch_loss.front()).c_str(),
                        fmt(res.epoch_loss.back()).c_str());
        };
    });
}

void add_probe(CLI::App& app, Action& action) {
    auto* cmd = app.add_subcommand("probe", "Alignment head on frozen encoders");
    auto o = stage_options(*cmd, "--from", "Pretrain run directory");
    auto random = std::make_shared<bool>(false);
    auto single = std::make_shared<bool>(false);
    cmd->add_flag("--random", *random, "Use freshly initialized encoders instead of --from");
    cmd->add_flag("--single", *single, "Also fit a linear readout on each encoder alone");
    cmd->callback([o, random, single, &action] {
        action = [o, random, single] {
            if (o->from.empty() == !*random)
                throw Error(ErrorCode::InvalidArgument, "probe needs exactly one of --from or --random");
            const auto cfg = o->flags.resolve(o->from.empty() ? fs::path() : fs::path(o->from) / kConfigFile);
            prepare_run_dir(o->out, o->force);
            const auto data = train::prepare_data(cfg.data);
            auto theta = train::make_encoder(cfg, 0, *data.graph), phi = train::make_encoder(cfg, 1, *data.graph);
            if (!*random) load_encoders(o->from, cfg, theta, phi);
            train::RunLog log(true);
            auto res = train::linear_probe(cfg, theta, phi, data, &log);
            train::Fields summary{{"train_acc", res.train_acc}, {"acc", res.test_acc}};
            if (*single) {
                summary.push_back({"acc_theta", train::linear_probe_single(cfg, theta, data, &log, "probe_theta").test_acc});
                summary.push_back({"acc_phi", train::linear_probe_single(cfg, phi, data, &log, "probe_phi").test_acc});
            }
            log.summary("probe", summary);
            save_model(o->out, teacher_state({std::move(theta), std::move(phi), std::move(res.head)}), cfg);
            finish_run(o->out, "probe", "probe", cfg, log);
            std::printf("probe accuracy %s\n", fmt(res.test_acc).c_str());
        };
    });
}

void add_finetune(CLI::App& app, Action& action) {
    auto* cmd = app.add_subcommand("finetune", "End-to-end tuning, then a fresh alignment head");
    auto o = stage_options(*cmd, "--from", "Pretrain run directory");
    cmd->get_option("--from")->required();
    cmd->callback([o, &action] {
        action = [o] {
            const auto cfg = o->flags.resolve(fs::path(o->from) / kConfigFile);
            prepare_run_dir(o->out, o->force);
            const auto data = train::prepare_data(cfg.data);
            auto theta = train::make_encoder(cfg, 0, *data.graph), phi = train::make_encoder(cfg, 1, *data.graph);
            load_encoders(o->from, cfg, theta, phi);
            train::RunLog log(true);
            auto res = train::finetune(cfg, theta, phi, data, &log);
            log.summary("finetune", {{"acc_theta", res.encoder_acc[0]},
                                     {"acc_phi", res.encoder_acc[1]},
                                     {"acc", res.align.test_acc}});
            save_model(o->out, teacher_state({std::move(theta), std::move(phi), std::move(res.align.head)}), cfg);
            finish_run(o->out, "finetune", "finetune", cfg, log);
            std::printf("finetune accuracy %s\n", fmt(res.align.test_acc).c_str());
        };
    });
}

void add_distill(CLI::App& app, Action& action) {
    auto* cmd = app.add_subcommand("distill", "Distill a probed or fine-tuned teacher into the student");
    auto o = stage_options(*cmd, "--teacher", "Probe or finetune run directory");
    cmd->get_option("--teacher")->required();
    auto sweep = std::make_shared<bool>(false);
    cmd->add_flag("--tau-sweep", *sweep, "Run once per temperature in distill.tau_sweep and write tau_sweep.csv");
    cmd->callback([o, sweep, &action] {
        action = [o, sweep] {
            auto cfg = o->flags.resolve(fs::path(o->from) / kConfigFile);
            const std::string teacher_stage = read_run_stage(o->from);
            if (teacher_stage == "probe") {
                cfg.distill_loss.teacher = nn::TeacherKind::LinearProbed;
            } else if (teacher_stage == "finetune") {
                cfg.distill_loss.teacher = nn::TeacherKind::FineTuned;
            } else {
                throw Error(ErrorCode::InvalidArgument,
                            o->from + " holds a '" + teacher_stage + "' run; the teacher must be a probe or finetune run");
            }
            prepare_run_dir(o->out, o->force);
            const auto data = train::prepare_data(cfg.data);
            auto teacher = teacher_shell(cfg, *data.graph, data.num_classes);
            train::load_checkpoint(fs::path(o->from) / kModelFile, teacher_state(teacher), train::model_digest(cfg));
            train::RunLog log(true);
            if (*sweep) {
                std::string csv = "tau,student_acc,teacher_acc\n";
                for (double tau : cfg.tau_sweep) {
                    TrainConfig c = cfg;
                    c.distill_loss.tau = tau;
                    const auto r = train::distill_stage(c, teacher.theta, teacher.phi, teacher.head, data, &log);
                    csv += fmt(tau) + "," + fmt(r.student_acc) + "," + fmt(r.teacher_acc) + "\n";
                }
                atomic_write_text(fs::path(o->out) / "tau_sweep.csv", csv);
                finish_run(o->out, "distill --tau-sweep", "distill_sweep", cfg, log);
                std::fputs(csv.c_str(), stdout);
                return;
            }
            auto r = train::distill_stage(cfg, teacher.theta, teacher.phi, teacher.head, data, &log);
            save_model(o->out, student_state({std::move(r.student), std::move(r.head)}), cfg);
            finish_run(o->out, "distill", "distill", cfg, log);
            std::printf("student accuracy %s, teacher %s, params %zu / %zu\n", fmt(r.student_acc).c_str(),
                        fmt(r.teacher_acc).c_str(), r.student_params, r.teacher_params);
        };
    });
}

void add_eval(CLI::App& app, Action& action) {
    auto* cmd = app.add_subcommand("eval", "Held-out accuracy of a probe, finetune or distill run");
    auto o = std::make_shared<StageOpts>();
    cmd->add_option("run", o->from, "Run directory")->required()->check(CLI::ExistingDirectory);
    o->flags.add_to(*cmd);
    cmd->callback([o, &action] {
        action = [o] {
            const auto cfg = o->flags.resolve(fs::path(o->from) / kConfigFile);
            const auto data = train::prepare_data(cfg.data);
            const double acc = train::accuracy(run_logits(o->from, cfg, data), train::labels_of(data.test));
            nlohmann::ordered_json j;
            j["run"] = o->from;
            j["stage"] = read_run_stage(o->from);
            j["stream"] = stream_name(cfg.data.stream);
            j["acc"] = acc;
            std::printf("%s\n", j.dump().c_str());
        };
    });
}

void add_eval_3s(CLI::App& app, Action& action) {
    auto* cmd = app.add_subcommand("eval-3s", "Equal-weight score fusion of joint, bone and motion runs");
    struct Opts {
        std::string joint, bone, motion, out;
        bool force = false;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--joint", o->joint, "Run trained on the joint stream")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--bone", o->bone, "Run trained on the bone stream")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--motion", o->motion, "Run trained on the motion stream")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("-o,--out", o->out, "Directory for fusion.csv");
    cmd->add_flag("--force", o->force, "Overwrite an existing output directory");
    cmd->callback([o, &action] {
        action = [o] {
            const std::vector<std::pair<Stream, std::string>> runs{
                {Stream::Joint, o->joint}, {Stream::Bone, o->bone}, {Stream::Motion, o->motion}};
            std::vector<ad::Tensor> logits;
            std::vector<int> labels;
            for (const auto& [stream, dir] : runs) {
                const auto cfg = run_config(dir);
                if (cfg.data.stream != stream)
                    throw Error(ErrorCode::InvalidArgument, dir + " was trained on the " +
                                                                stream_name(cfg.data.stream) + " stream, expected " +
                                                                stream_name(stream));
                const auto data = train::prepare_data(cfg.data);
                const auto l = train::labels_of(data.test);
                if (!labels.empty() && l != labels)
                    throw Error(ErrorCode::LabelSpaceMismatch, dir + " was evaluated on different test labels");
                labels = l;
                logits.push_back(run_logits(dir, cfg, data));
            }
            const auto res = train::fuse_scores(logits, labels);
            std::string csv = "stream,acc\n";
            for (std::size_t i = 0; i < runs.size(); ++i)
                csv += std::string(stream_name(runs[i].first)) + "," + fmt(res.stream_acc[i]) + "\n";
            csv += "fused," + fmt(res.fused_acc) + "\n";
            if (!o->out.empty()) {
                prepare_run_dir(o->out, o->force);
                atomic_write_text(fs::path(o->out) / "fusion.csv", csv);
            }
            std::fputs(csv.c_str(), stdout);
        };
    });
}

void add_ablate(CLI::App& app, Action& action) {
    auto* cmd = app.add_subcommand("ablate-masks", "Spatial x temporal masking grid with single-encoder probes");
    struct Opts {
        ConfigFlags flags;
        std::string spatial = "hdsm,ldsm,random", temporal = "hmtm,lmtm,random", seeds, out;
        bool force = false;
    };
    auto o = std::make_shared<Opts>();
    o->flags.add_to(*cmd);
    cmd->add_option("--spatial", o->spatial, "Spatial modes, comma separated")->capture_default_str();
    cmd->add_option("--temporal", o->temporal, "Temporal modes, comma separated")->capture_default_str();
    cmd->add_option("--seeds", o->seeds, "Seeds, comma separated (default: ablate.seeds, else seed)");
    cmd->add_option("-o,--out", o->out, "Run directory for ablation.csv");
    cmd->add_flag("--force", o->force, "Overwrite an existing run directory");
    cmd->callback([o, &action] {
        action = [o] {
            const auto cfg = o->flags.resolve();
            const auto spatial = parse_list<SpatialMode>(o->spatial, parse_spatial_mode);
            const auto temporal = parse_list<TemporalMode>(o->temporal, parse_temporal_mode);
            auto seeds = parse_list<std::uint64_t>(o->seeds, [](const std::string& s) { return std::stoull(s); });
            if (seeds.empty()) seeds = cfg.ablate_seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.ablate_seeds;
            if (spatial.empty() || temporal.empty())
                throw Error(ErrorCode::InvalidArgument, "need at least one spatial and one temporal mode");
            if (!o->out.empty()) prepare_run_dir(o->out, o->force);
            const auto data = train::prepare_data(cfg.data);
            const auto rows = train::ablation_grid(cfg, data, spatial, temporal, seeds, train::worker_count());
            const auto csv = train::ablation_csv(rows);
            if (!o->out.empty()) {
                atomic_write_text(fs::path(o->out) / "ablation.csv", csv);
                atomic_write_text(fs::path(o->out) / kConfigFile, train::config_text(cfg));
                write_run_record(o->out, "ablate-masks", "ablation", cfg);
            }
            std::fputs(csv.c_str(), stdout);
        };
    });
}

void add_seeds(CLI::App& app, Action& action) {
    auto* cmd = app.add_subcommand("seeds", "Repeat pretrain and a downstream stage per seed; mean and std");
    struct Opts {
        StageOpts stage;
        std::string until = "probe", seeds;
    };
    auto o = std::make_shared<Opts>();
    o->stage.flags.add_to(*cmd);
    cmd->add_option("-o,--out", o->stage.out, "Run directory")->required();
    cmd->add_flag("--force", o->stage.force, "Overwrite an existing run directory");
    cmd->add_option("--stage", o->until, "Last stage per seed")
        ->check(CLI::IsMember({"pretrain", "probe", "finetune", "distill"}))
        ->capture_default_str();
    cmd->add_option("--seeds", o->seeds, "Seeds, comma separated (default: the seeds key)");
    cmd->callback([o, &action] {
        action = [o] {
            const auto cfg = o->stage.flags.resolve();
            auto seeds = parse_list<std::uint64_t>(o->seeds, [](const std::string& s) { return std::stoull(s); });
            if (seeds.empty()) seeds = cfg.seeds;
            if (seeds.size() < 2) throw Error(ErrorCode::InvalidArgument, "seeds needs at least 2 seeds");
            prepare_run_dir(o->stage.out, o->stage.force);
            const auto data = train::prepare_data(cfg.data);
            const std::string until = o->until;
            std::vector<train::Fields> results(seeds.size());
            std::vector<train::RunLog> logs(seeds.size());
            train::parallel_for(seeds.size(), train::worker_count(), [&](std::size_t i) {
                TrainConfig c = cfg;
                c.seed = seeds[i];
                auto& f = results[i];
                auto& log = logs[i];
                auto pre = train::pretrain(c, data.train, &log);
                const auto ps = pretrain_summary(pre);
                f.push_back({"pretrain_final_loss", ps[1].second});
                f.push_back({"pretrain_reduction", ps[2].second});
                if (until == "pretrain") return;
                auto probe = train::linear_probe(c, pre.encoders[0], pre.encoders[1], data, &log);
                f.push_back({"probe_acc", probe.test_acc});
                if (until == "finetune") {
                    auto ft = train::finetune(c, pre.encoders[0], pre.encoders[1], data, &log);
                    f.push_back({"finetune_acc", ft.align.test_acc});
                } else if (until == "distill") {
                    auto d = train::distill_stage(c, pre.encoders[0], pre.encoders[1], probe.head, data, &log);
                    f.push_back({"student_acc", d.student_acc});
                    f.push_back({"teacher_acc", d.teacher_acc});
                }
            });
            std::string per_seed = "seed,metric,value\n";
            std::map<std::string, std::vector<double>> by_metric;
            std::vector<std::string> order;
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                for (const auto& [k, v] : results[i]) {
                    per_seed += std::to_string(seeds[i]) + "," + k + "," + fmt(v) + "\n";
                    if (!by_metric.count(k)) order.push_back(k);
                    by_metric[k].push_back(v);
                }
                const fs::path dir = fs::path(o->stage.out) / ("seed_" + std::to_string(seeds[i]));
                fs::create_directories(dir);
                logs[i].write(dir);
            }
            std::string summary = "metric,n,mean,std,min,max\n";
            for (const auto& k : order) {
                const auto s = train::summarize(by_metric[k]);
                summary += k + "," + std::to_string(s.n) + "," + fmt(s.mean) + "," + fmt(s.stddev) + "," + fmt(s.min) +
                           "," + fmt(s.max) + "\n";
            }
            atomic_write_text(fs::path(o->stage.out) / "seeds.csv", per_seed);
            atomic_write_text(fs::path(o->stage.out) / "summary.csv", summary);
            atomic_write_text(fs::path(o->stage.out) / kConfigFile, train::config_text(cfg));
            write_run_record(o->stage.out, "seeds", "seeds", cfg);
            std::fputs(summary.c_str(), stdout);
        };
    });
}

}  // namespace

void register_train_commands(CLI::App& app, Action& action) {
    add_pretrain(app, action);
    add_probe(app, action);
    add_finetune(app, action);
    add_distill(app, action);
    add_eval(app, action);
    add_eval_3s(app, action);
    add_ablate(app, action);
    add_seeds(app, action);
}

}  // namespace asma::cli
