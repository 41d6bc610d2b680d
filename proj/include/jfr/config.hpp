#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "jfr/data.hpp"
#include "jfr/eval.hpp"
#include "jfr/network.hpp"
#include "jfr/train.hpp"

namespace jfr {

/// Everything a command needs, parsed from one strict JSON document.
///
/// Schema (all keys optional, defaults below; unknown keys anywhere abort):
///   {
///     "seed": 0,
///     "paths": {"dataset": "dataset.jfds", "pairs": "pairs.csv",
///               "checkpoint": "model.jfck", "out": "out"},
///     "data":  {"classes", "samples_per_class", "height", "width",
///               "train_classes", "verification_pairs", "position_jitter",
///               "brightness_jitter", "noise_sigma", "min_blobs",
///               "max_blobs", "min_center_separation"},
///     "net":   {"input_height", "input_width", "channel_divisor",
///               "blocks" [4], "feature_dim", "classes",
///               "srnet_kernels" [3], "stage_conv_pad"},
///     "train": {"mode", "batch_size", "lr_srnet", "lr_frnet", "lr_softmax",
///               "gamma", "decay_steps" [], "total_steps",
///               "alpha", "beta1", "beta2"},
///     "eval":  {"input", "pca_dim", "fpr_target", "folds"}
///   }
///
/// The single top-level seed drives every command; it is copied into the
/// training and evaluation sub-configs when the hash is stamped.
struct CliConfig {
    std::uint64_t seed = 0;

    std::string dataset_path = "dataset.jfds";
    std::string pairs_path = "pairs.csv";
    std::string checkpoint_path = "model.jfck";
    std::string out_dir = "out";

    SyntheticSpec data;
    NetConfig net;
    TrainConfig train;
    TrainMode train_mode = TrainMode::Joint;
    EvalConfig eval;
    TestInput eval_input = TestInput::Hallucinated;

    std::uint64_t config_hash = 0;  // FNV-1a 64 of canonical_config(*this)
};

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view text);

/// Complete canonical rendering: every field explicit, keys sorted, compact.
/// Configs differing only in omitted-vs-explicit defaults render identically.
/// The hash field itself is not part of the rendering.
std::string canonical_config(const CliConfig& cfg);

/// Recomputes config_hash from the canonical form and propagates seed and
/// hash into the training and evaluation sub-configs. Call after any field
/// override.
void stamp_config(CliConfig& cfg);

/// Strict parse: unknown keys anywhere are rejected before any side effect,
/// wrong types raise std::invalid_argument naming the key path. Omitted keys
/// keep their defaults. The result arrives stamped.
CliConfig parse_config(const std::string& json_text);

CliConfig load_config_file(const std::string& path);

}  // namespace jfr
