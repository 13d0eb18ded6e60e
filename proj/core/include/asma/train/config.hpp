#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asma/augment.hpp"
#include "asma/masking.hpp"
#include "asma/nn/distill.hpp"
#include "asma/nn/encoder.hpp"
#include "asma/nn/ssl.hpp"
#include "asma/synthetic.hpp"

ASMA_NAMESPACE_BEGIN
namespace train {

struct OptimConfig {
    std::size_t epochs = 150;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    double weight_decay = 1e-5;
    double warmup_epochs = 10;

    /// Throws InvalidArgument naming `stage` unless epochs >= 1, batch >= 2,
    /// lr > 0, weight_decay >= 0 and 0 <= warmup < epochs.
    void validate(const std::string& stage) const;
};

struct DataConfig {
    std::string path;  ///< empty: generate the synthetic set
    std::uint64_t seed = 1;
    std::size_t classes = 4;
    std::size_t per_class = 50;
    std::size_t frames = 50;
    Stream stream = Stream::Joint;
    bool all_bodies = true;
    double test_fraction = 0.2;
    SynthOptions synth;
};

/// Every knob of every stage. Readable from `key = value` text; each field has
/// a dotted key (see config_keys()).
struct TrainConfig {
    std::uint64_t seed = 1;
    DataConfig data;

    nn::EncoderConfig encoder = nn::EncoderConfig::teacher();
    nn::EncoderConfig student = nn::EncoderConfig::student();
    std::size_t projector_hidden = 6144;
    std::size_t projector_out = 6144;
    std::size_t projector_depth = 3;
    bool projector_shared = false;  ///< one projector for both encoders
    nn::BarlowLossConfig loss;

    MaskSpec mask_theta{9, 10, SpatialMode::HDSM, TemporalMode::LMTM};
    MaskSpec mask_phi{9, 10, SpatialMode::LDSM, TemporalMode::HMTM};
    bool masks_per_epoch = true;  ///< redraw masks and augmentations every epoch
    AugmentationSpec aug;

    std::size_t align_heads = 4;
    bool align_norm = false;

    OptimConfig pretrain{150, 128, 1e-3, 1e-5, 10};
    OptimConfig probe{150, 128, 1e-3, 1e-5, 10};
    OptimConfig finetune{150, 128, 5e-3, 1e-5, 10};
    OptimConfig finetune_align{50, 128, 1e-4, 1e-5, 0};
    OptimConfig distill{150, 128, 1e-2, 1e-5, 10};
    nn::DistillConfig distill_loss;
    std::vector<double> tau_sweep{2, 4, 6, 8, 9, 12};

    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<std::uint64_t> ablate_seeds;  ///< empty: just `seed`

    nn::ProjectorConfig projector_config() const;

    /// Throws InvalidArgument on the first unusable field.
    void validate() const;
};

/// Every recognised key, sorted.
std::vector<std::string> config_keys();

/// Assigns one key. Throws InvalidArgument for unknown keys or bad values.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const TrainConfig& cfg, const std::string& key);

/// Applies `key = value` lines; '#' starts a comment. Errors name the line.
void apply_config_text(TrainConfig& cfg, const std::string& text, const std::string& source = "<config>");
TrainConfig load_config(const std::filesystem::path& path);

/// Applies a "key=value" override.
void apply_override(TrainConfig& cfg, const std::string& assignment);

/// Canonical text: every key in sorted order, one `key = value` per line.
std::string config_text(const TrainConfig& cfg);
std::uint64_t config_digest(const TrainConfig& cfg);

/// Digest of the keys that decide parameter shapes (encoder, student,
/// projector, align). Checkpoints carry it so mismatched architectures are
/// rejected on load.
std::uint64_t model_digest(const TrainConfig& cfg);

}  // namespace train
ASMA_NAMESPACE_END
