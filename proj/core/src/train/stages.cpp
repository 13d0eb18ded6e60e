#include "asma/train/stages.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "asma/error.hpp"
#include "asma/io_util.hpp"
#include "asma/nn/distill.hpp"
#include "asma/synthetic.hpp"
#include "asma/train/optim.hpp"

ASMA_NAMESPACE_BEGIN
namespace train {

namespace {

constexpr std::uint64_t kShuffleTag = 0x73687566;  // "shuf"
constexpr std::uint64_t kViewTag = 0x76696577;     // "view"
constexpr std::uint64_t kInitTag = 0x696e6974;     // "init"

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Schedule schedule_of(const OptimConfig& opt) {
    return {opt.lr, opt.warmup_epochs, static_cast<double>(opt.epochs)};
}

std::vector<ad::Tensor> params_of(std::initializer_list<const nn::Module*> modules) {
    std::vector<ad::Tensor> out;
    for (const auto* m : modules)
        for (auto& t : m->parameters()) out.push_back(t);
    return out;
}

// Branches beyond the canonical two get their own streams.
std::uint64_t branch_seed(std::uint64_t seed, InitSlot first, InitSlot second, std::size_t k) {
    if (k == 0) return init_seed(seed, first);
    if (k == 1) return init_seed(seed, second);
    return derive_seed(init_seed(seed, first), k);
}

std::string branch_name(std::size_t k, std::size_t count) {
    if (count <= 2) return k == 0 ? "theta" : "phi";
    return "b" + std::to_string(k);
}

}  // namespace

DataBundle prepare_data(const DataConfig& cfg, const GraphPtr& graph) {
    Dataset all;
    if (cfg.path.empty()) {
        all.items = generate_synthetic(cfg.classes, cfg.per_class, cfg.frames, graph, cfg.seed, cfg.synth);
    } else {
        all = load_dataset(cfg.path, graph, cfg.frames, cfg.all_bodies);
    }
    all.validate();
    if (cfg.stream != Stream::Joint) all = derive_dataset(all, cfg.stream);
    auto split = split_dataset(all, cfg.test_fraction);
    if (split.train.empty() || split.test.empty())
        throw Error(ErrorCode::DatasetEmpty, "train/test split left one side empty (" +
                                                 std::to_string(all.size()) + " sequences)");
    DataBundle out;
    out.num_classes = all.num_classes();
    out.train = std::move(split.train);
    out.test = std::move(split.test);
    out.graph = graph;
    return out;
}

DataBundle prepare_data(const DataConfig& cfg) { return prepare_data(cfg, build_ntu_graph()); }

std::uint64_t init_seed(std::uint64_t seed, InitSlot slot) {
    return derive_seed(seed, kInitTag, static_cast<std::uint64_t>(slot));
}

nn::StgcnEncoder make_encoder(const TrainConfig& cfg, std::size_t branch, const SkeletonGraph& graph) {
    Rng rng(branch_seed(cfg.seed, InitSlot::EncoderTheta, InitSlot::EncoderPhi, branch));
    return nn::StgcnEncoder(cfg.encoder, graph, rng);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t b = 0; b < n; b += batch)
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch)));
    if (out.size() > 1 && out.back().size() < 2) {
        auto tail = out.back();
        out.pop_back();
        out.back().insert(out.back().end(), tail.begin(), tail.end());
    }
    return out;
}

std::uint64_t view_seed(const TrainConfig& cfg, std::size_t epoch, std::size_t index) {
    return derive_seed(cfg.seed ^ kViewTag, cfg.masks_per_epoch ? epoch : 0, index);
}

void require_finite(double value, const std::string& what) {
    if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteDetected, what + " is not finite");
}

// ---------------------------------------------------------------- pretrain

PretrainResult pretrain_branches(const TrainConfig& cfg, const std::vector<MaskSpec>& masks, const Dataset& data,
                                 RunLog* log) {
    cfg.validate();
    if (data.empty()) throw Error(ErrorCode::DatasetEmpty, "pretraining needs data");
    data.validate();
    if (data.size() < 2) throw Error(ErrorCode::BatchTooSmall, "pretraining needs at least 2 sequences");
    if (masks.empty()) throw Error(ErrorCode::InvalidArgument, "pretraining needs at least one mask spec");
    for (const auto& m : masks) m.validate(data.joints(), data.frames());

    const auto& graph = *data.graph();
    PretrainResult res;
    for (std::size_t k = 0; k < masks.size(); ++k) {
        res.encoders.push_back(make_encoder(cfg, k, graph));
        if (k > 0 && cfg.projector_shared) {
            res.projectors.push_back(res.projectors.front());
        } else {
            Rng rng(branch_seed(cfg.seed, InitSlot::ProjectorTheta, InitSlot::ProjectorPhi, k));
            res.projectors.push_back(std::make_shared<nn::Projector>(cfg.projector_config(), rng));
        }
    }
    std::vector<ad::Tensor> params;
    for (std::size_t k = 0; k < masks.size(); ++k) {
        for (auto& t : res.encoders[k].parameters()) params.push_back(t);
        if (k == 0 || !cfg.projector_shared)
            for (auto& t : res.projectors[k]->parameters()) params.push_back(t);
    }
    Adam adam(params, {0.9, 0.999, 1e-8, cfg.pretrain.weight_decay});
    const auto sched = schedule_of(cfg.pretrain);

    const std::size_t K = masks.size();
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.pretrain.epochs; ++epoch) {
        const auto t0 = Clock::now();
        Rng shuffle(derive_seed(cfg.seed, kShuffleTag, epoch));
        const auto batches = make_batches(data.size(), cfg.pretrain.batch_size, shuffle);
        std::vector<double> sums(2 * K + 1, 0.0);
        double lr = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& idx = batches[bi];
            lr = lr_at(static_cast<double>(epoch) + static_cast<double>(bi) / static_cast<double>(batches.size()), sched);
            std::vector<AsymmetricViews> views;
            views.reserve(idx.size());
            for (auto i : idx) {
                Rng rng(view_seed(cfg, epoch, i));
                views.push_back(make_asymmetric_views(data.items[i], masks, cfg.aug, rng));
            }
            std::vector<const SkeletonSequence*> anchors;
            for (const auto& v : views) anchors.push_back(&v.anchor);
            const ad::Tensor anchor = nn::stack_batch(anchors);

            ad::Tape tape;
            std::vector<nn::BranchLoss> terms;
            ad::Tensor total;
            for (std::size_t k = 0; k < K; ++k) {
                std::vector<const SkeletonSequence*> sp, tp;
                for (const auto& v : views) {
                    sp.push_back(&v.branches[k].spatial);
                    tp.push_back(&v.branches[k].temporal);
                }
                const auto& enc = res.encoders[k];
                const auto& proj = *res.projectors[k];
                nn::BranchProjections z{proj.forward(enc.forward(anchor, true).pooled, true),
                                        proj.forward(enc.forward(nn::stack_batch(sp), true).pooled, true),
                                        proj.forward(enc.forward(nn::stack_batch(tp), true).pooled, true)};
                terms.push_back(nn::branch_loss(z, cfg.loss));
                total = k == 0 ? terms.back().total : ad::add(total, terms.back().total);
            }
            const double loss = total.item();
            require_finite(loss, "pretraining loss at epoch " + std::to_string(epoch));
            ad::backward(total);
            adam.step(lr);
            adam.zero_grad();

            Fields f;
            for (std::size_t k = 0; k < K; ++k) {
                const auto name = branch_name(k, K);
                f.emplace_back("L1_" + name, terms[k].spatial.item());
                f.emplace_back("L2_" + name, terms[k].temporal.item());
                sums[2 * k] += terms[k].spatial.item();
                sums[2 * k + 1] += terms[k].temporal.item();
            }
            f.emplace_back("total", loss);
            sums[2 * K] += loss;
            if (log) log->step("pretrain", step, f);
            ++step;
        }
        const double nb = static_cast<double>(batches.size());
        Fields f;
        for (std::size_t k = 0; k < K; ++k) {
            const auto name = branch_name(k, K);
            f.emplace_back("L1_" + name, sums[2 * k] / nb);
            f.emplace_back("L2_" + name, sums[2 * k + 1] / nb);
        }
        f.emplace_back("total", sums[2 * K] / nb);
        res.epoch_loss.push_back(sums[2 * K] / nb);
        if (log) log->epoch("pretrain", epoch, lr, f, ms_since(t0));
    }
    return res;
}

PretrainResult pretrain(const TrainConfig& cfg, const Dataset& data, RunLog* log) {
    return pretrain_branches(cfg, {cfg.mask_theta, cfg.mask_phi}, data, log);
}

// ------------------------------------------------------------- evaluation

Encoded encode(const nn::StgcnEncoder& encoder, const Dataset& data, std::size_t batch) {
    ad::NoGradGuard guard;
    std::vector<ad::Tensor> tokens, pooled;
    for (std::size_t b = 0; b < data.size(); b += batch) {
        std::vector<const SkeletonSequence*> items;
        for (std::size_t i = b; i < std::min(data.size(), b + batch); ++i) items.push_back(&data.items[i]);
        auto out = encoder.forward(nn::stack_batch(items), false);
        tokens.push_back(out.tokens);
        pooled.push_back(out.pooled);
    }
    return {ad::concat(tokens, 0), ad::concat(pooled, 0)};
}

std::vector<int> labels_of(const Dataset& data) {
    std::vector<int> out;
    out.reserve(data.size());
    for (const auto& s : data.items) {
        if (!s.label()) throw Error(ErrorCode::LabelSpaceMismatch, "sequence without a label in a labelled stage");
        out.push_back(*s.label());
    }
    return out;
}

double accuracy(const ad::Tensor& logits, const std::vector<int>& labels) {
    if (labels.empty()) return 0.0;
    const auto pred = nn::argmax_rows(logits);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

ad::Tensor gather_rows(const ad::Tensor& x, const std::vector<std::size_t>& idx) {
    ad::Shape shape = x.shape();
    const std::size_t row = x.size() / shape[0];
    shape[0] = idx.size();
    ad::Tensor out = ad::Tensor::zeros(shape);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(idx[i] * row), row,
                    out.values().begin() + static_cast<std::ptrdiff_t>(i * row));
    return out;
}

namespace {

std::vector<int> pick(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

// Supervised training of a head on fixed inputs. `forward` maps row indices
// of the training inputs to logits on the active tape.
void fit_head(const std::string& stage, const OptimConfig& opt, std::uint64_t seed, std::vector<ad::Tensor> params,
              std::size_t n, const std::vector<int>& labels,
              const std::function<ad::Tensor(const std::vector<std::size_t>&)>& forward,
              const std::function<Fields()>& epoch_eval, RunLog* log) {
    Adam adam(std::move(params), {0.9, 0.999, 1e-8, opt.weight_decay});
    const auto sched = schedule_of(opt);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        const auto t0 = Clock::now();
        Rng shuffle(derive_seed(seed, kShuffleTag ^ fnv1a64(stage), epoch));
        const auto batches = make_batches(n, opt.batch_size, shuffle);
        double sum = 0, lr = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            lr = lr_at(static_cast<double>(epoch) + static_cast<double>(bi) / static_cast<double>(batches.size()), sched);
            ad::Tape tape;
            ad::Tensor loss = nn::cross_entropy(forward(batches[bi]), pick(labels, batches[bi]));
            const double l = loss.item();
            require_finite(l, stage + " loss at epoch " + std::to_string(epoch));
            ad::backward(loss);
            adam.step(lr);
            adam.zero_grad();
            sum += l;
            if (log) log->step(stage, step, {{"loss", l}});
            ++step;
        }
        Fields f{{"loss", sum / static_cast<double>(batches.size())}};
        const bool last = epoch + 1 == opt.epochs;
        if (epoch_eval && last) {
            auto extra = epoch_eval();
            f.insert(f.end(), extra.begin(), extra.end());
        }
        if (log) log->epoch(stage, epoch, lr, f, ms_since(t0));
    }
}

}  // namespace

ProbeResult train_align(const TrainConfig& cfg, const OptimConfig& opt, const std::string& stage,
                        const nn::StgcnEncoder& theta, const nn::StgcnEncoder& phi, const DataBundle& data,
                        RunLog* log) {
    cfg.validate();
    opt.validate(stage);
    const auto train_theta = encode(theta, data.train), train_phi = encode(phi, data.train);
    const auto test_theta = encode(theta, data.test), test_phi = encode(phi, data.test);
    const auto train_labels = labels_of(data.train), test_labels = labels_of(data.test);

    Rng rng(init_seed(cfg.seed, InitSlot::Align));
    nn::AlignConfig ac{cfg.align_heads, cfg.encoder.embed_dim, data.num_classes, cfg.align_norm};
    ProbeResult res{nn::AlignHead(ac, rng), 0, 0};
    const auto& head = res.head;
    auto eval = [&] {
        ad::NoGradGuard g;
        res.train_acc = accuracy(head.forward(train_theta.tokens, train_phi.tokens), train_labels);
        res.test_acc = accuracy(head.forward(test_theta.tokens, test_phi.tokens), test_labels);
        return Fields{{"train_acc", res.train_acc}, {"acc", res.test_acc}};
    };
    fit_head(
        stage, opt, cfg.seed, head.parameters(), data.train.size(), train_labels,
        [&](const std::vector<std::size_t>& idx) {
            return head.forward(gather_rows(train_theta.tokens, idx), gather_rows(train_phi.tokens, idx));
        },
        eval, log);
    return res;
}

ProbeResult linear_probe(const TrainConfig& cfg, const nn::StgcnEncoder& theta, const nn::StgcnEncoder& phi,
                         const DataBundle& data, RunLog* log) {
    return train_align(cfg, cfg.probe, "probe", theta, phi, data, log);
}

ad::Tensor LinearReadout::forward(const ad::Tensor& x) const {
    return head.forward(ad::mul_along(ad::add_bias(x, shift, 1), scale, 1));
}

nn::Linear LinearReadout::folded() const {
    const std::size_t d = head.in_features(), c = head.out_features();
    nn::Linear out = head;
    out.weight = head.weight.clone();
    out.bias = head.bias.clone();
    out.weight.set_requires_grad(true);
    out.bias.set_requires_grad(true);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < c; ++k) {
            out.weight[j * c + k] = head.weight[j * c + k] * scale[j];
            out.bias[k] += shift[j] * scale[j] * head.weight[j * c + k];
        }
    return out;
}

namespace {

LinearReadout fit_readout(const TrainConfig& cfg, const OptimConfig& opt, const ad::Tensor& train_x,
                          const std::vector<int>& train_labels, const ad::Tensor& test_x,
                          const std::vector<int>& test_labels, std::size_t classes, const std::string& stage,
                          RunLog* log) {
    Rng rng(init_seed(cfg.seed, InitSlot::Readout));
    const std::size_t n = train_x.dim(0), d = train_x.dim(1);
    std::vector<real> shift(d), scale(d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0, ss = 0;
        for (std::size_t i = 0; i < n; ++i) s += train_x[i * d + j];
        const double m = s / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) ss += (train_x[i * d + j] - m) * (train_x[i * d + j] - m);
        shift[j] = static_cast<real>(-m);
        scale[j] = static_cast<real>(1.0 / std::sqrt(ss / static_cast<double>(n) + 1e-8));
    }
    LinearReadout res{nn::Linear(d, classes, rng), ad::Tensor::from({d}, std::move(shift)),
                      ad::Tensor::from({d}, std::move(scale)), 0, 0};
    const ad::Tensor train_z = [&] {
        ad::NoGradGuard g;
        return ad::mul_along(ad::add_bias(train_x, res.shift, 1), res.scale, 1);
    }();
    const auto& head = res.head;
    auto eval = [&] {
        ad::NoGradGuard g;
        res.train_acc = accuracy(head.forward(train_z), train_labels);
        res.test_acc = accuracy(res.forward(test_x), test_labels);
        return Fields{{"train_acc", res.train_acc}, {"acc", res.test_acc}};
    };
    fit_head(
        stage, opt, cfg.seed, head.parameters(), n, train_labels,
        [&](const std::vector<std::size_t>& idx) { return head.forward(gather_rows(train_z, idx)); }, eval, log);
    return res;
}

}  // namespace

LinearReadout linear_probe_single(const TrainConfig& cfg, const nn::StgcnEncoder& encoder, const DataBundle& data,
                                  RunLog* log, const std::string& stage) {
    cfg.validate();
    const auto tr = encode(encoder, data.train), te = encode(encoder, data.test);
    return fit_readout(cfg, cfg.probe, tr.pooled, labels_of(data.train), te.pooled, labels_of(data.test),
                       data.num_classes, stage, log);
}

// --------------------------------------------------------------- finetune

FinetuneResult finetune(const TrainConfig& cfg, nn::StgcnEncoder& theta, nn::StgcnEncoder& phi, const DataBundle& data,
                        RunLog* log) {
    cfg.validate();
    const auto train_labels = labels_of(data.train), test_labels = labels_of(data.test);
    const ad::Tensor train_x = nn::stack_batch(data.train.items);
    const ad::Tensor test_x = nn::stack_batch(data.test.items);
    std::vector<double> encoder_acc;
    std::size_t k = 0;
    for (nn::StgcnEncoder* enc : {&theta, &phi}) {
        const std::string stage = std::string("finetune_") + (k == 0 ? "theta" : "phi");
        Rng rng(init_seed(cfg.seed, k == 0 ? InitSlot::HeadTheta : InitSlot::HeadPhi));
        nn::Linear head(cfg.encoder.embed_dim, data.num_classes, rng);
        enc->set_requires_grad(true);
        double acc = 0;
        auto eval = [&] {
            ad::NoGradGuard g;
            acc = accuracy(head.forward(enc->forward(test_x, false).pooled), test_labels);
            return Fields{{"acc", acc}};
        };
        fit_head(
            stage, cfg.finetune, cfg.seed + k, params_of({enc, &head}), data.train.size(), train_labels,
            [&](const std::vector<std::size_t>& idx) {
                return head.forward(enc->forward(gather_rows(train_x, idx), true).pooled);
            },
            eval, log);
        encoder_acc.push_back(acc);
        ++k;
    }
    return {std::move(encoder_acc), train_align(cfg, cfg.finetune_align, "finetune_align", theta, phi, data, log)};
}

// ---------------------------------------------------------------- distill

ad::Tensor teacher_logits(const nn::StgcnEncoder& theta, const nn::StgcnEncoder& phi, const nn::AlignHead& head,
                          const Dataset& data) {
    const auto a = encode(theta, data), b = encode(phi, data);
    ad::NoGradGuard g;
    return head.forward(a.tokens, b.tokens);
}

DistillResult distill_stage(const TrainConfig& cfg, const nn::StgcnEncoder& theta, const nn::StgcnEncoder& phi,
                            const nn::AlignHead& teacher_head, const DataBundle& data, RunLog* log) {
    cfg.validate();
    const auto& graph = *data.graph;
    const auto test_labels = labels_of(data.test);
    const auto train_theta = encode(theta, data.train), train_phi = encode(phi, data.train);
    ad::Tensor t_logits, t_features;
    {
        ad::NoGradGuard g;
        t_logits = teacher_head.forward(train_theta.tokens, train_phi.tokens);
        t_features = teacher_head.fuse(train_theta.tokens, train_phi.tokens);
    }
    const double teacher_acc = accuracy(teacher_logits(theta, phi, teacher_head, data.test), test_labels);

    Rng srng(init_seed(cfg.seed, InitSlot::Student));
    Rng hrng(init_seed(cfg.seed, InitSlot::StudentHead));
    Rng frng(init_seed(cfg.seed, InitSlot::FeatureProj));
    DistillResult res{nn::StgcnEncoder(cfg.student, graph, srng), nn::Linear(cfg.student.embed_dim, data.num_classes, hrng),
                      0, teacher_acc, 0, 0};
    nn::FeatureDistill feat(cfg.encoder.embed_dim, cfg.student.embed_dim, frng);
    const bool logit_mode = cfg.distill_loss.mode == nn::DistillMode::LogitKl;
    auto params = logit_mode ? params_of({&res.student, &res.head}) : params_of({&res.student, &feat});

    const ad::Tensor train_x = nn::stack_batch(data.train.items);
    const ad::Tensor test_x = nn::stack_batch(data.test.items);
    Adam adam(params, {0.9, 0.999, 1e-8, cfg.distill.weight_decay});
    const auto sched = schedule_of(cfg.distill);
    const std::string stage = "distill";
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.distill.epochs; ++epoch) {
        const auto t0 = Clock::now();
        Rng shuffle(derive_seed(cfg.seed, kShuffleTag ^ fnv1a64(stage), epoch));
        const auto batches = make_batches(data.train.size(), cfg.distill.batch_size, shuffle);
        double sum = 0, lr = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& idx = batches[bi];
            lr = lr_at(static_cast<double>(epoch) + static_cast<double>(bi) / static_cast<double>(batches.size()), sched);
            ad::Tape tape;
            const auto h = res.student.forward(gather_rows(train_x, idx), true).pooled;
            ad::Tensor loss = logit_mode ? nn::kd_loss(res.head.forward(h), gather_rows(t_logits, idx), cfg.distill_loss)
                                         : feat.loss(h, gather_rows(t_features, idx));
            const double l = loss.item();
            require_finite(l, "distillation loss at epoch " + std::to_string(epoch));
            ad::backward(loss);
            adam.step(lr);
            adam.zero_grad();
            sum += l;
            if (log) log->step(stage, step, {{"kd_loss", l}, {"tau", cfg.distill_loss.tau}});
            ++step;
        }
        if (log)
            log->epoch(stage, epoch, lr, {{"kd_loss", sum / static_cast<double>(batches.size())}, {"tau", cfg.distill_loss.tau}},
                       ms_since(t0));
    }

    if (logit_mode) {
        ad::NoGradGuard g;
        res.student_acc = accuracy(res.head.forward(res.student.forward(test_x, false).pooled), test_labels);
    } else {
        const auto tr = encode(res.student, data.train), te = encode(res.student, data.test);
        auto readout = fit_readout(cfg, cfg.probe, tr.pooled, labels_of(data.train), te.pooled, test_labels,
                                   data.num_classes, "distill_readout", log);
        res.head = readout.folded();
        res.student_acc = readout.test_acc;
    }
    res.student_params = nn::count_params(res.student) + nn::count_params(res.head);
    res.teacher_params = nn::count_params(theta) + nn::count_params(phi) + nn::count_params(teacher_head);
    if (log)
        log->summary(stage, {{"student_acc", res.student_acc},
                             {"teacher_acc", res.teacher_acc},
                             {"student_params", static_cast<double>(res.student_params)},
                             {"teacher_params", static_cast<double>(res.teacher_params)}});
    return res;
}

// ------------------------------------------------------------------- misc

FusionResult fuse_scores(const std::vector<ad::Tensor>& logits, const std::vector<int>& labels) {
    if (logits.empty()) throw Error(ErrorCode::InvalidArgument, "fusion needs at least one stream");
    for (const auto& l : logits)
        if (l.shape() != logits[0].shape() || l.rank() != 2 || l.dim(0) != labels.size())
            throw Error(ErrorCode::LabelSpaceMismatch, "stream scores disagree: " + ad::shape_string(l.shape()) +
                                                           " vs " + ad::shape_string(logits[0].shape()) + " for " +
                                                           std::to_string(labels.size()) + " labels");
    ad::NoGradGuard g;
    FusionResult res;
    ad::Tensor sum;
    for (const auto& l : logits) {
        res.stream_acc.push_back(accuracy(l, labels));
        const auto p = ad::softmax(l, 1);
        sum = sum.defined() ? ad::add(sum, p) : p;
    }
    res.fused_acc = accuracy(sum, labels);
    return res;
}

SeedStats summarize(const std::vector<double>& values) {
    SeedStats s;
    s.n = values.size();
    if (values.empty()) return s;
    double total = 0;
    for (double v : values) total += v;
    s.mean = total / static_cast<double>(s.n);
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    return s;
}

std::vector<AblationRow> ablation_grid(const TrainConfig& cfg, const DataBundle& data,
                                       const std::vector<SpatialMode>& spatial,
                                       const std::vector<TemporalMode>& temporal,
                                       const std::vector<std::uint64_t>& seeds, std::size_t threads) {
    std::vector<AblationRow> rows;
    for (auto s : spatial)
        for (auto t : temporal)
            for (auto seed : seeds) rows.push_back({s, t, seed, 0.0});
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        TrainConfig c = cfg;
        c.seed = rows[i].seed;
        MaskSpec m = cfg.mask_theta;
        m.spatial = rows[i].spatial;
        m.temporal = rows[i].temporal;
        auto pre = pretrain_branches(c, {m}, data.train, nullptr);
        rows[i].probe_acc = linear_probe_single(c, pre.encoders[0], data, nullptr).test_acc;
    });
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "spatial,temporal,seed,probe_acc\n";
    for (const auto& r : rows) {
        char acc[32];
        std::snprintf(acc, sizeof acc, "%.6f", r.probe_acc);
        out << to_string(r.spatial) << ',' << to_string(r.temporal) << ',' << r.seed << ',' << acc << '\n';
    }
    return out.str();
}

std::size_t worker_count() {
    if (const char* env = std::getenv("ASMA_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first) first = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

}  // namespace train
ASMA_NAMESPACE_END
