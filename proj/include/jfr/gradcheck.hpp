#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jfr/network.hpp"

namespace jfr {

/// Finite-difference validation of every analytic gradient of the joint
/// objective (pixel + classification + clustering terms) on a small
/// randomly built network.
///
/// A central difference estimates a derivative only where the objective is
/// twice differentiable across the whole stencil [theta-h, theta+h], and a
/// freshly initialised network is NOT such a point: with all biases at
/// zero, any activation that a ReLU clamps to exactly 0.0 re-enters the
/// next ReLU at exactly 0.0 (clamped zero times kernel weight plus zero
/// bias), i.e. exactly on the hinge. Instances are therefore built at a
/// generic point -- biases get a small random offset, the feature head is
/// scaled so the smooth terms keep moderate curvature -- and a sweep only
/// counts if no perturbed evaluation switched a ReLU gate or pooling
/// argmax; otherwise the whole instance is resampled.

/// One self-contained check problem: a network plus a batch.
struct GradcheckInstance {
    JointNetwork net;
    Tensor input;   // [N,3,H,W], stands in for the upscaled low-res batch
    Tensor target;  // [N,3,H,W] high-res reference
    std::vector<std::size_t> labels;
    LossWeights weights{0.01, 1.0, 0.008};
    double kink_margin = 0.0;  // margin measured at acceptance
    std::uint64_t resamples = 0;
    std::uint64_t variant = 0;
};

/// Builds a deterministic instance for `seed`, resampling until the margin
/// exceeds `margin_floor`. `variant` selects an independent instance family
/// (used when a sweep has to be retried after a branch flip). Throws
/// std::runtime_error if no acceptable point is found in bounded attempts.
GradcheckInstance make_gradcheck_instance(const NetConfig& cfg, std::uint64_t seed,
                                          double margin_floor, std::uint64_t variant = 0);

/// Worst-case comparison between analytic and central-difference gradients.
struct GradcheckReport {
    std::uint64_t seed = 0;
    double max_rel_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t values_checked = 0;
    double kink_margin = 0.0;
    std::uint64_t resamples = 0;
    std::uint64_t variant = 0;
    /// True when a perturbed forward changed a gate/argmax, invalidating the
    /// stencil; the sweep stops early and the caller retries elsewhere.
    bool flip_detected = false;
};

/// Runs the full parameter sweep on one instance with step size `h`.
/// `corrupt` deliberately damages one analytic gradient first; it exists to
/// prove the checker can fail.
GradcheckReport check_joint_gradients(GradcheckInstance& inst, double h,
                                      bool corrupt = false);

struct GradcheckSuiteResult {
    std::vector<GradcheckReport> reports;
    double max_rel_error = 0.0;
    double h = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// One flip-free check_joint_gradients run per seed; passes when every
/// report's max_rel_error is below `tolerance`.
GradcheckSuiteResult run_gradcheck_suite(const NetConfig& cfg,
                                         std::span<const std::uint64_t> seeds, double h,
                                         double tolerance, bool corrupt = false);

}  // namespace jfr
