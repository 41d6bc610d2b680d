#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jfr/data.hpp"
#include "jfr/losses.hpp"
#include "jfr/network.hpp"

namespace jfr {

/// Which parts of the cascade a training run exercises and what the
/// recognition stack sees as input. These are the five regimes the
/// evaluation matrix needs.
enum class TrainMode {
    FrnetHr,              // recognition stack alone, fed ground-truth images
    FrnetLr,              // recognition stack alone, fed upscaled low-res images
    SrnetOnly,            // hallucination stack alone, pixel loss only
    FrnetOnHallucinated,  // recognition stack fed frozen-hallucination output
    Joint,                // full cascade, three-term loss, both stacks updated
};

/// Accepts "frnet-hr", "frnet-lr", "srnet-only", "frnet-on-hallucinated",
/// "joint". Throws std::invalid_argument otherwise.
TrainMode parse_train_mode(std::string_view name);
std::string_view to_string(TrainMode mode);

/// Hyperparameters of the SGD training loop. Defaults are the full-scale
/// reference values; desk runs shrink the budget and raise the rates.
///
/// All loss reductions are sums over the batch, so learning rates are
/// coupled to batch_size.
struct TrainConfig {
    std::size_t batch_size = 128;
    double lr_srnet = 1e-5;
    double lr_frnet = 0.1;
    /// The classifier head follows the recognition stack's schedule by
    /// convention; kept separate so it can be overridden.
    double lr_softmax = 0.1;
    /// Center learning rate. Zero freezes the centers.
    double gamma = 0.5;
    /// Steps at which every learning rate drops by a decade; the drop applies
    /// from the named step onward (inclusive boundary).
    std::vector<std::size_t> decay_steps = {16000, 24000};
    std::size_t total_steps = 28000;
    LossWeights weights{0.01, 1.0, 0.008};
    /// Seeds the shuffle and mirror-augmentation streams of train().
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless: batch_size >= 1, the three
    /// learning rates are > 0, gamma and the loss weights are >= 0, and
    /// decay_steps is strictly increasing with every entry < total_steps.
    void validate() const;
};

/// Piecewise-constant decade decay: (lr_srnet, lr_frnet) after dividing each
/// base rate by 10 for every decay milestone at or before `step`.
std::pair<double, double> lr_at(const TrainConfig& cfg, std::uint64_t step);

/// One training mini-batch: stacked image tensors plus labels. Every mode
/// reads the slice it needs (ground truth, upscaled low-res, or both).
struct Batch {
    Tensor lr_upscaled;  // [N,3,H,W]
    Tensor hr;           // [N,3,H,W]
    std::vector<std::size_t> labels;
};

/// Stack samples[indices[i]] into a batch. flips[i] != 0 mirrors both images
/// of that slot horizontally, keeping the pair aligned; an empty flips span
/// means no augmentation. Throws std::invalid_argument on an empty index
/// list, an out-of-range index, a flips/indices length mismatch, or samples
/// whose shapes disagree.
Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices,
                 std::span<const std::uint8_t> flips);

/// Scalar record of one optimization step. The three loss terms are reported
/// unweighted; loss_total folds in the configured weights. Terms a mode does
/// not compute are zero.
struct StepResult {
    double loss_total = 0.0;
    double loss_h = 0.0;
    double loss_c = 0.0;
    double loss_d = 0.0;
    double lr_srnet = 0.0;
    double lr_frnet = 0.0;
};

/// One metrics row per executed step; mirrors StepResult.
struct TrainLogRow {
    std::uint64_t step = 0;
    double loss_total = 0.0;
    double loss_h = 0.0;
    double loss_c = 0.0;
    double loss_d = 0.0;
    double lr_sr = 0.0;
    double lr_fr = 0.0;
};

/// Observation hook fired at the end of each phase a step executes, in
/// execution order:
///   "loss"             every gradient computed from the pre-update
///                      parameters of one forward pass
///   "softmax_update"   classifier head moved
///   "backward"         recognition stack backprop, pixel-space gradient
///                      joined at the splice, hallucination stack backprop
///   "parameter_update" stack parameters moved, each group at its own rate
///   "center_update"    class centers moved (always last)
/// Modes that skip a stack never report its phases.
struct TrainHooks {
    std::function<void(std::string_view phase)> on_phase;
    /// Fired after each completed step with its metrics row, so a caller
    /// still holds the partial log when a later step aborts the run.
    std::function<void(const TrainLogRow&)> on_step;
};

/// One SGD step in the given mode. Rates come from lr_at(cfg, net.step) and
/// the same milestone count applies to lr_softmax; net.step increments once
/// at the end. cfg.gamma is copied onto the center bank so the config stays
/// the single source of truth during a run.
///
/// cfg is trusted as-is (train() validates; direct callers may zero
/// individual rates for ablations). Throws std::invalid_argument on an empty
/// or mis-shaped batch or an out-of-range label, std::runtime_error naming
/// the first non-finite loss term.
StepResult train_step(JointNetwork& net, const Batch& batch, const TrainConfig& cfg,
                      TrainMode mode = TrainMode::Joint, const TrainHooks* hooks = nullptr);

struct TrainResult {
    std::vector<TrainLogRow> log;
};

/// Run the SGD loop until net.step reaches cfg.total_steps (a net loaded
/// from a checkpoint resumes its budget; a finished one is returned as-is
/// with an empty log). Each epoch visits every training sample exactly once
/// in a freshly shuffled order, the tail batch of an epoch may be short, and
/// each drawn sample is mirrored with probability 1/2. Both streams are
/// derived from cfg.seed, so a run is bit-reproducible for a given starting
/// net; resuming restarts the shuffle lineage from cfg.seed.
///
/// Throws std::invalid_argument on an invalid config, an empty training
/// split, or a training label outside the network's class count; propagates
/// train_step errors.
TrainResult train(JointNetwork& net, const Dataset& data, const TrainConfig& cfg,
                  TrainMode mode = TrainMode::Joint, const TrainHooks* hooks = nullptr);

/// Write rows as CSV with the header
/// `step,loss_total,loss_h,loss_c,loss_d,lr_sr,lr_fr`, doubles formatted
/// round-trip exact (%.17g). Throws std::runtime_error on I/O failure.
void write_metrics_csv(const std::string& path, std::span<const TrainLogRow> rows);

}  // namespace jfr
