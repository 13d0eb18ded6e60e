#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "asma/dataset.hpp"
#include "asma/nn/align.hpp"
#include "asma/nn/encoder.hpp"
#include "asma/nn/ssl.hpp"
#include "asma/train/config.hpp"
#include "asma/train/run_log.hpp"

ASMA_NAMESPACE_BEGIN
namespace train {

/// Train/test split of the configured data in the configured stream.
struct DataBundle {
    Dataset train;
    Dataset test;
    std::size_t num_classes = 0;
    GraphPtr graph;
};

/// Loads (or synthesizes) the data, derives the stream and splits it. Throws
/// DatasetEmpty when either side of the split is empty.
DataBundle prepare_data(const DataConfig& cfg, const GraphPtr& graph);
DataBundle prepare_data(const DataConfig& cfg);

/// Independent initialization streams per model component.
enum class InitSlot : std::uint64_t {
    EncoderTheta = 1,
    EncoderPhi,
    ProjectorTheta,
    ProjectorPhi,
    Align,
    HeadTheta,
    HeadPhi,
    Student,
    StudentHead,
    FeatureProj,
    Readout,
};
std::uint64_t init_seed(std::uint64_t seed, InitSlot slot);

/// Freshly initialized encoder for branch 0 (theta) or 1 (phi); identical to
/// the starting point of pretraining with the same seed.
nn::StgcnEncoder make_encoder(const TrainConfig& cfg, std::size_t branch, const SkeletonGraph& graph);

/// Shuffled index batches of size `batch`; a trailing batch smaller than 2 is
/// merged into the previous one.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng& rng);

/// Seed of the augmentation and mask draws for training sample `index` at
/// `epoch` of pretraining.
std::uint64_t view_seed(const TrainConfig& cfg, std::size_t epoch, std::size_t index);

/// Throws NonFiniteDetected when `value` is NaN or infinite.
void require_finite(double value, const std::string& what);

// ---------------------------------------------------------------- pretrain

struct PretrainResult {
    std::vector<nn::StgcnEncoder> encoders;
    std::vector<std::shared_ptr<nn::Projector>> projectors;  ///< aliased when shared
    std::vector<double> epoch_loss;                          ///< mean total per epoch
};

/// Self-supervised training of one encoder (and projector) per mask spec.
/// Each branch is aligned anchor-to-spatial and anchor-to-temporal; the loss
/// is the sum over branches. Labels are ignored.
PretrainResult pretrain_branches(const TrainConfig& cfg, const std::vector<MaskSpec>& masks, const Dataset& data,
                                 RunLog* log = nullptr);

/// Two-branch pretraining with cfg.mask_theta / cfg.mask_phi.
PretrainResult pretrain(const TrainConfig& cfg, const Dataset& data, RunLog* log = nullptr);

// ------------------------------------------------------------- evaluation

/// Eval-mode encoder outputs for a whole dataset, computed without a tape.
struct Encoded {
    ad::Tensor tokens;  ///< [N, L, E]
    ad::Tensor pooled;  ///< [N, E]
};
Encoded encode(const nn::StgcnEncoder& encoder, const Dataset& data, std::size_t batch = 64);

std::vector<int> labels_of(const Dataset& data);
double accuracy(const ad::Tensor& logits, const std::vector<int>& labels);

/// Rows `idx` of a tensor along axis 0.
ad::Tensor gather_rows(const ad::Tensor& x, const std::vector<std::size_t>& idx);

struct ProbeResult {
    nn::AlignHead head;
    double train_acc = 0;
    double test_acc = 0;
};

/// Trains the alignment head on frozen eval-mode encoders with `opt`.
ProbeResult train_align(const TrainConfig& cfg, const OptimConfig& opt, const std::string& stage,
                        const nn::StgcnEncoder& theta, const nn::StgcnEncoder& phi, const DataBundle& data,
                        RunLog* log = nullptr);

/// Linear evaluation: align head on frozen encoders with cfg.probe.
ProbeResult linear_probe(const TrainConfig& cfg, const nn::StgcnEncoder& theta, const nn::StgcnEncoder& phi,
                         const DataBundle& data, RunLog* log = nullptr);

/// Linear classifier on features standardized with training-set statistics.
struct LinearReadout {
    nn::Linear head;
    ad::Tensor shift;  ///< negated per-feature mean, [D]
    ad::Tensor scale;  ///< per-feature 1 / std, [D]
    double train_acc = 0;
    double test_acc = 0;

    ad::Tensor forward(const ad::Tensor& x) const;
    /// Plain Linear on raw features with the standardization folded in.
    nn::Linear folded() const;
};

/// Linear classifier on the pooled features of one frozen encoder.
LinearReadout linear_probe_single(const TrainConfig& cfg, const nn::StgcnEncoder& encoder, const DataBundle& data,
                                  RunLog* log = nullptr, const std::string& stage = "probe_single");

// --------------------------------------------------------------- finetune

struct FinetuneResult {
    std::vector<double> encoder_acc;  ///< phase 1, per encoder with its own head
    ProbeResult align;                ///< phase 2
};

/// Phase 1 trains each encoder end to end with a linear head (cfg.finetune);
/// phase 2 trains a fresh alignment head on the tuned, frozen encoders
/// (cfg.finetune_align). The encoders are updated in place.
FinetuneResult finetune(const TrainConfig& cfg, nn::StgcnEncoder& theta, nn::StgcnEncoder& phi, const DataBundle& data,
                        RunLog* log = nullptr);

// ---------------------------------------------------------------- distill

struct DistillResult {
    nn::StgcnEncoder student;
    nn::Linear head;
    double student_acc = 0;
    double teacher_acc = 0;
    std::size_t student_params = 0;
    std::size_t teacher_params = 0;
};

/// Trains cfg.student from the frozen teacher (theta, phi, align head) on the
/// distillation loss alone. The reported student accuracy is that of its
/// linear head; in feature mode the head is fitted afterwards on frozen
/// student features with cfg.probe.
DistillResult distill_stage(const TrainConfig& cfg, const nn::StgcnEncoder& theta, const nn::StgcnEncoder& phi,
                            const nn::AlignHead& teacher_head, const DataBundle& data, RunLog* log = nullptr);

/// Teacher logits for a dataset (eval mode, no tape).
ad::Tensor teacher_logits(const nn::StgcnEncoder& theta, const nn::StgcnEncoder& phi, const nn::AlignHead& head,
                          const Dataset& data);

// ------------------------------------------------------------------- misc

struct FusionResult {
    std::vector<double> stream_acc;
    double fused_acc = 0;
};

/// Equal-weight sum of per-stream class probabilities, then argmax. Throws
/// LabelSpaceMismatch when the streams disagree on shape.
FusionResult fuse_scores(const std::vector<ad::Tensor>& logits, const std::vector<int>& labels);

struct SeedStats {
    std::size_t n = 0;
    double mean = 0;
    double stddev = 0;  ///< sample standard deviation
    double min = 0;
    double max = 0;
};
SeedStats summarize(const std::vector<double>& values);

struct AblationRow {
    SpatialMode spatial;
    TemporalMode temporal;
    std::uint64_t seed;
    double probe_acc;
};

/// Single-branch pretraining plus single-encoder linear probe for every
/// (spatial, temporal, seed) combination, rows in that nesting order.
std::vector<AblationRow> ablation_grid(const TrainConfig& cfg, const DataBundle& data,
                                       const std::vector<SpatialMode>& spatial,
                                       const std::vector<TemporalMode>& temporal,
                                       const std::vector<std::uint64_t>& seeds, std::size_t threads = 1);

/// Header "spatial,temporal,seed,probe_acc".
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Worker count from ASMA_THREADS, else the hardware concurrency (>= 1).
std::size_t worker_count();

/// Runs fn(0..n-1) on up to `threads` threads. Each index runs exactly once;
/// the first exception is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace train
ASMA_NAMESPACE_END
