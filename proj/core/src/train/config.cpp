#include "asma/train/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "asma/error.hpp"
#include "asma/io_util.hpp"

ASMA_NAMESPACE_BEGIN
namespace train {

void OptimConfig::validate(const std::string& stage) const {
    auto fail = [&](const std::string& m) { throw Error(ErrorCode::InvalidArgument, stage + ": " + m); };
    if (epochs < 1) fail("epochs must be >= 1");
    if (batch_size < 2) fail("batch must be >= 2");
    if (!(lr > 0)) fail("lr must be > 0");
    if (weight_decay < 0) fail("weight_decay must be >= 0");
    if (warmup_epochs < 0 || warmup_epochs >= static_cast<double>(epochs)) fail("warmup must be in [0, epochs)");
}

nn::ProjectorConfig TrainConfig::projector_config() const {
    return {encoder.embed_dim, projector_hidden, projector_out, projector_depth};
}

void TrainConfig::validate() const {
    encoder.validate();
    student.validate();
    projector_config().validate();
    loss.validate();
    aug.validate();
    distill_loss.validate();
    pretrain.validate("pretrain");
    probe.validate("probe");
    finetune.validate("finetune");
    finetune_align.validate("finetune_align");
    distill.validate("distill");
    if (align_heads == 0 || encoder.embed_dim % align_heads != 0)
        throw Error(ErrorCode::InvalidArgument, "align.heads must divide encoder.embed_dim");
    if (data.classes < 2 || data.per_class < 1) throw Error(ErrorCode::InvalidArgument, "data: need >= 2 classes");
    if (!(data.test_fraction > 0 && data.test_fraction < 1))
        throw Error(ErrorCode::InvalidArgument, "data.test_fraction must be in (0, 1)");
    const std::size_t joints = build_ntu_graph()->num_joints();
    mask_theta.validate(joints, data.frames);
    mask_phi.validate(joints, data.frames);
    for (double t : tau_sweep)
        if (!(t > 0)) throw Error(ErrorCode::InvalidArgument, "distill.tau_sweep entries must be > 0");
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(std::uint64_t v, int) { return std::to_string(v); }
std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}
std::string fmt(bool v) { return v ? "true" : "false"; }

template <class T>
T parse_number(const std::string& key, const std::string& s, const char* expected) {
    T v{};
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) bad_value(key, s, expected);
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    bad_value(key, s, "a boolean");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != ' ') {
            cur += ch;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

template <class T>
std::string fmt_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_same_v<T, double>)
            out += fmt(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

struct Field {
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

using Table = std::map<std::string, Field>;

template <class Acc>
void add_size(Table& t, const std::string& key, Acc acc) {
    t[key] = {[acc](const TrainConfig& c) { return fmt(acc(const_cast<TrainConfig&>(c))); },
              [acc, key](TrainConfig& c, const std::string& v) {
                  acc(c) = parse_number<std::size_t>(key, v, "a non-negative integer");
              }};
}

template <class Acc>
void add_u64(Table& t, const std::string& key, Acc acc) {
    t[key] = {[acc](const TrainConfig& c) { return fmt(acc(const_cast<TrainConfig&>(c)), 0); },
              [acc, key](TrainConfig& c, const std::string& v) {
                  acc(c) = parse_number<std::uint64_t>(key, v, "a non-negative integer");
              }};
}

template <class Acc>
void add_double(Table& t, const std::string& key, Acc acc) {
    t[key] = {[acc](const TrainConfig& c) { return fmt(acc(const_cast<TrainConfig&>(c))); },
              [acc, key](TrainConfig& c, const std::string& v) { acc(c) = parse_number<double>(key, v, "a number"); }};
}

template <class Acc>
void add_bool(Table& t, const std::string& key, Acc acc) {
    t[key] = {[acc](const TrainConfig& c) { return fmt(static_cast<bool>(acc(const_cast<TrainConfig&>(c)))); },
              [acc, key](TrainConfig& c, const std::string& v) { acc(c) = parse_bool(key, v); }};
}

template <class Acc>
void add_string(Table& t, const std::string& key, Acc acc) {
    t[key] = {[acc](const TrainConfig& c) { return acc(const_cast<TrainConfig&>(c)); },
              [acc](TrainConfig& c, const std::string& v) { acc(c) = v; }};
}

template <class T, class Acc>
void add_list(Table& t, const std::string& key, Acc acc) {
    t[key] = {[acc](const TrainConfig& c) { return fmt_list(acc(const_cast<TrainConfig&>(c))); },
              [acc, key](TrainConfig& c, const std::string& v) {
                  std::vector<T> out;
                  for (const auto& item : split_list(v)) {
                      if constexpr (std::is_same_v<T, double>)
                          out.push_back(parse_number<double>(key, item, "a list of numbers"));
                      else
                          out.push_back(parse_number<T>(key, item, "a list of integers"));
                  }
                  acc(c) = std::move(out);
              }};
}

template <class Get, class Set>
void add_enum(Table& t, const std::string& key, Get get, Set set) {
    t[key] = {[get](const TrainConfig& c) { return get(c); },
              [set, key](TrainConfig& c, const std::string& v) {
                  try {
                      set(c, v);
                  } catch (const Error& e) {
                      throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': " + e.what());
                  }
              }};
}

void add_encoder(Table& t, const std::string& p, nn::EncoderConfig TrainConfig::*member) {
    add_size(t, p + ".layers", [member](TrainConfig& c) -> std::size_t& { return (c.*member).num_layers; });
    add_size(t, p + ".hidden", [member](TrainConfig& c) -> std::size_t& { return (c.*member).hidden_channels; });
    add_size(t, p + ".spatial_kernel", [member](TrainConfig& c) -> std::size_t& { return (c.*member).spatial_kernel; });
    add_size(t, p + ".temporal_kernel",
             [member](TrainConfig& c) -> std::size_t& { return (c.*member).temporal_kernel; });
    add_size(t, p + ".in_channels", [member](TrainConfig& c) -> std::size_t& { return (c.*member).in_channels; });
    add_size(t, p + ".embed_dim", [member](TrainConfig& c) -> std::size_t& { return (c.*member).embed_dim; });
    add_list<std::size_t>(t, p + ".downsample",
                          [member](TrainConfig& c) -> std::vector<std::size_t>& { return (c.*member).downsample_layers; });
    add_bool(t, p + ".widen", [member](TrainConfig& c) -> bool& { return (c.*member).widen_on_downsample; });
}

void add_optim(Table& t, const std::string& p, OptimConfig TrainConfig::*member) {
    add_size(t, p + ".epochs", [member](TrainConfig& c) -> std::size_t& { return (c.*member).epochs; });
    add_size(t, p + ".batch", [member](TrainConfig& c) -> std::size_t& { return (c.*member).batch_size; });
    add_double(t, p + ".lr", [member](TrainConfig& c) -> double& { return (c.*member).lr; });
    add_double(t, p + ".weight_decay", [member](TrainConfig& c) -> double& { return (c.*member).weight_decay; });
    add_double(t, p + ".warmup", [member](TrainConfig& c) -> double& { return (c.*member).warmup_epochs; });
}

void add_mask(Table& t, const std::string& p, MaskSpec TrainConfig::*member) {
    add_enum(
        t, p + ".spatial", [member](const TrainConfig& c) { return to_string((c.*member).spatial); },
        [member](TrainConfig& c, const std::string& v) { (c.*member).spatial = parse_spatial_mode(v); });
    add_enum(
        t, p + ".temporal", [member](const TrainConfig& c) { return to_string((c.*member).temporal); },
        [member](TrainConfig& c, const std::string& v) { (c.*member).temporal = parse_temporal_mode(v); });
}

const Table& table() {
    static const Table t = [] {
        Table t;
        add_u64(t, "seed", [](TrainConfig& c) -> std::uint64_t& { return c.seed; });
        add_list<std::uint64_t>(t, "seeds", [](TrainConfig& c) -> std::vector<std::uint64_t>& { return c.seeds; });
        add_list<std::uint64_t>(t, "ablate.seeds",
                                [](TrainConfig& c) -> std::vector<std::uint64_t>& { return c.ablate_seeds; });

        add_string(t, "data.path", [](TrainConfig& c) -> std::string& { return c.data.path; });
        add_u64(t, "data.seed", [](TrainConfig& c) -> std::uint64_t& { return c.data.seed; });
        add_size(t, "data.classes", [](TrainConfig& c) -> std::size_t& { return c.data.classes; });
        add_size(t, "data.per_class", [](TrainConfig& c) -> std::size_t& { return c.data.per_class; });
        add_size(t, "data.frames", [](TrainConfig& c) -> std::size_t& { return c.data.frames; });
        add_enum(
            t, "data.stream", [](const TrainConfig& c) { return std::string(stream_name(c.data.stream)); },
            [](TrainConfig& c, const std::string& v) { c.data.stream = parse_stream(v); });
        add_bool(t, "data.all_bodies", [](TrainConfig& c) -> bool& { return c.data.all_bodies; });
        add_double(t, "data.test_fraction", [](TrainConfig& c) -> double& { return c.data.test_fraction; });

        add_double(t, "synth.noise", [](TrainConfig& c) -> double& { return c.data.synth.noise_sigma; });
        add_double(t, "synth.amplitude_jitter", [](TrainConfig& c) -> double& { return c.data.synth.amplitude_jitter; });
        add_double(t, "synth.frequency_jitter", [](TrainConfig& c) -> double& { return c.data.synth.frequency_jitter; });
        add_double(t, "synth.distractor", [](TrainConfig& c) -> double& { return c.data.synth.distractor_amplitude; });
        add_double(t, "synth.translation", [](TrainConfig& c) -> double& { return c.data.synth.translation_sigma; });
        add_double(t, "synth.sway", [](TrainConfig& c) -> double& { return c.data.synth.sway_amplitude; });

        add_encoder(t, "encoder", &TrainConfig::encoder);
        add_encoder(t, "student", &TrainConfig::student);

        add_size(t, "projector.hidden", [](TrainConfig& c) -> std::size_t& { return c.projector_hidden; });
        add_size(t, "projector.out", [](TrainConfig& c) -> std::size_t& { return c.projector_out; });
        add_size(t, "projector.depth", [](TrainConfig& c) -> std::size_t& { return c.projector_depth; });
        add_bool(t, "projector.shared", [](TrainConfig& c) -> bool& { return c.projector_shared; });

        add_double(t, "loss.lambda", [](TrainConfig& c) -> double& { return c.loss.lambda; });
        add_double(t, "loss.eps", [](TrainConfig& c) -> double& { return c.loss.eps; });
        add_bool(t, "loss.center", [](TrainConfig& c) -> bool& { return c.loss.center; });

        // Joint and frame counts are shared by both branches.
        t["mask.joints"] = {[](const TrainConfig& c) { return fmt(c.mask_theta.n_joints); },
                            [](TrainConfig& c, const std::string& v) {
                                c.mask_theta.n_joints = c.mask_phi.n_joints =
                                    parse_number<std::size_t>("mask.joints", v, "a non-negative integer");
                            }};
        t["mask.frames"] = {[](const TrainConfig& c) { return fmt(c.mask_theta.k_frames); },
                            [](TrainConfig& c, const std::string& v) {
                                c.mask_theta.k_frames = c.mask_phi.k_frames =
                                    parse_number<std::size_t>("mask.frames", v, "a non-negative integer");
                            }};
        add_mask(t, "mask.theta", &TrainConfig::mask_theta);
        add_mask(t, "mask.phi", &TrainConfig::mask_phi);
        add_bool(t, "mask.per_epoch", [](TrainConfig& c) -> bool& { return c.masks_per_epoch; });

        add_double(t, "aug.crop_lo", [](TrainConfig& c) -> double& { return c.aug.crop_lo; });
        add_double(t, "aug.crop_hi", [](TrainConfig& c) -> double& { return c.aug.crop_hi; });
        add_double(t, "aug.rotation", [](TrainConfig& c) -> double& { return c.aug.rotation_max_deg; });
        add_double(t, "aug.flip", [](TrainConfig& c) -> double& { return c.aug.flip_probability; });

        add_size(t, "align.heads", [](TrainConfig& c) -> std::size_t& { return c.align_heads; });
        add_bool(t, "align.norm", [](TrainConfig& c) -> bool& { return c.align_norm; });

        add_optim(t, "pretrain", &TrainConfig::pretrain);
        add_optim(t, "probe", &TrainConfig::probe);
        add_optim(t, "finetune", &TrainConfig::finetune);
        add_optim(t, "finetune_align", &TrainConfig::finetune_align);
        add_optim(t, "distill", &TrainConfig::distill);
        add_double(t, "distill.tau", [](TrainConfig& c) -> double& { return c.distill_loss.tau; });
        add_double(t, "distill.student_tau", [](TrainConfig& c) -> double& { return c.distill_loss.student_tau; });
        add_bool(t, "distill.scale_tau_sq", [](TrainConfig& c) -> bool& { return c.distill_loss.scale_by_tau_sq; });
        add_enum(
            t, "distill.mode", [](const TrainConfig& c) { return nn::to_string(c.distill_loss.mode); },
            [](TrainConfig& c, const std::string& v) { c.distill_loss.mode = nn::parse_distill_mode(v); });
        add_enum(
            t, "distill.teacher", [](const TrainConfig& c) { return nn::to_string(c.distill_loss.teacher); },
            [](TrainConfig& c, const std::string& v) { c.distill_loss.teacher = nn::parse_teacher_kind(v); });
        add_list<double>(t, "distill.tau_sweep", [](TrainConfig& c) -> std::vector<double>& { return c.tau_sweep; });
        return t;
    }();
    return t;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, f] : table()) keys.push_back(k);
    return keys;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
    const auto it = table().find(key);
    if (it == table().end()) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    it->second.set(cfg, value);
}

std::string get_config_value(const TrainConfig& cfg, const std::string& key) {
    const auto it = table().find(key);
    if (it == table().end()) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    return it->second.get(cfg);
}

void apply_config_text(TrainConfig& cfg, const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument,
                        source + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        try {
            set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(e.code(), source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

TrainConfig load_config(const std::filesystem::path& path) {
    TrainConfig cfg;
    apply_config_text(cfg, read_text_file(path), path.string());
    return cfg;
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw Error(ErrorCode::InvalidArgument, "override '" + assignment + "' is not of the form key=value");
    set_config_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string config_text(const TrainConfig& cfg) {
    std::string out;
    for (const auto& [k, f] : table()) out += k + " = " + f.get(cfg) + "\n";
    return out;
}

std::uint64_t config_digest(const TrainConfig& cfg) { return fnv1a64(config_text(cfg)); }

std::uint64_t model_digest(const TrainConfig& cfg) {
    std::string text;
    for (const auto& [k, f] : table()) {
        const bool shape_key = k.starts_with("encoder.") || k.starts_with("student.") ||
                               k.starts_with("projector.") || k.starts_with("align.");
        if (shape_key) text += k + " = " + f.get(cfg) + "\n";
    }
    return fnv1a64(text);
}

}  // namespace train
ASMA_NAMESPACE_END
