#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jfr/data.hpp"
#include "jfr/network.hpp"
#include "jfr/tensor.hpp"
#include "jfr/train.hpp"

namespace jfr {

/// 10*log10(peak^2 / MSE) with the MSE averaged over every element, capped at
/// 99 dB so identical images stay finite. Throws std::invalid_argument on a
/// shape mismatch or non-positive peak.
///
/// Normalized images ((p-127.5)/128) scored with peak 255/128 give the same
/// dB as 8-bit images scored with peak 255.
double psnr(const Tensor& a, const Tensor& b, double peak);

/// Flip-concatenated recognition feature for a batch of images [N,3,H,W]:
/// row i is concat(f(x_i), f(hflip(x_i))) where f is the recognition stack,
/// preceded by the hallucination stack when use_srnet is set (the mirrored
/// branch is flipped before any processing, so mirroring an input exactly
/// swaps the two halves of its feature). Returns [N, 2*feature_dim]. Throws
/// std::invalid_argument when the images do not match the network's input
/// size.
Tensor extract_features(JointNetwork& net, const Tensor& images, bool use_srnet);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are sorted descending; vectors[i] is the unit eigenvector of
/// values[i], with its largest-magnitude coordinate made positive (lowest
/// index on magnitude ties) so the factorization is deterministic. Throws
/// std::invalid_argument on a non-square or non-symmetric input.
struct EigenDecomposition {
    Tensor values;   // [d]
    Tensor vectors;  // [d,d], row i <-> values[i]
};
EigenDecomposition symmetric_eigen(const Tensor& a);

/// Mean-centered projection onto the top principal directions of the data.
struct PcaProjection {
    Tensor mean;         // [d]
    Tensor basis;        // [out_dim, d], orthonormal rows, descending variance
    Tensor eigenvalues;  // [out_dim] kept variances (covariance normalized by N)
    double total_variance = 0.0;  // trace of the covariance
};

/// Fit on features [N,d]. The covariance is X_c^T X_c / N, so the mean
/// squared reconstruction error (1/N) sum_i |x_i - reconstruct(x_i)|^2 of a
/// truncated projection equals the sum of the discarded eigenvalues. Requires
/// 1 <= out_dim <= min(N, d).
PcaProjection pca_fit(const Tensor& features, std::size_t out_dim);

/// Project [N,d] (or a single [d] vector) to [N,out_dim] (or [out_dim]).
Tensor pca_project(const PcaProjection& proj, const Tensor& features);

/// dot(a,b) / (|a||b|) over two equally-shaped rank-1 tensors. Throws
/// std::invalid_argument on shape mismatch or an exactly zero-norm input.
double cosine_score(const Tensor& a, const Tensor& b);

/// A verification pair reduced to its similarity score and ground truth.
struct ScoredPair {
    double score;
    bool same;
};

/// Cosine-score every pair against rows of `features` ([N,k], indexed by the
/// pair's sample indices). Throws std::invalid_argument on an out-of-range
/// index.
std::vector<ScoredPair> score_pairs(const Tensor& features,
                                    std::span<const VerificationPair> pairs);

/// Fraction of pairs with (score >= threshold) == same.
double accuracy_at(std::span<const ScoredPair> pairs, double threshold);

/// The accuracy-maximizing threshold over the candidate set {midpoints of
/// consecutive sorted unique scores} plus one sentinel below the minimum and
/// one above the maximum; ties resolve to the lowest threshold. Throws
/// std::invalid_argument on an empty span.
double best_threshold(std::span<const ScoredPair> pairs);

/// K-fold cross-validated verification accuracy: pair i belongs to fold
/// i % folds; each fold is scored with the threshold that maximizes accuracy
/// on the other folds, and the mean held-out accuracy is returned. Requires
/// folds >= 2, at least 2 pairs per fold, and both classes present in every
/// training complement (throws std::invalid_argument otherwise, naming a
/// degenerate fold).
double verification_accuracy(std::span<const ScoredPair> pairs, std::size_t folds = 10);

struct TpAtFpr {
    double tp = 0.0;
    double threshold = 0.0;
    bool low_support = false;  // fewer negatives than 1/fpr_target
    std::size_t negatives = 0;
};

/// Largest true-positive rate over thresholds whose empirical false-positive
/// rate stays <= fpr_target (the all-reject threshold is always admissible,
/// so the result is well-defined). Throws std::invalid_argument when either
/// class is absent or fpr_target is outside (0,1].
TpAtFpr tp_at_fpr(std::span<const ScoredPair> pairs, double fpr_target = 0.001);

/// Which image variant the recognizer consumes at test time.
enum class TestInput {
    Hr,           // ground-truth images
    LrUpscaled,   // bicubic-upscaled low-res images
    Hallucinated  // upscaled low-res routed through the hallucination stack
};

/// Names: "hr", "lr-upscaled", "hallucinated".
TestInput parse_test_input(std::string_view name);
std::string_view to_string(TestInput input);

/// Evaluation-protocol knobs shared by every setting.
struct EvalConfig {
    /// Projection width; clamped per fit to min(samples, feature length).
    std::size_t pca_dim = 128;
    /// Desk-scale sets hold few pairs, so the default operating point is 1%
    /// rather than the full-scale 0.1%; reports carry the target used.
    double fpr_target = 0.01;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;  // provenance stamp copied into reports
};

/// One row of the settings report.
struct EvalReport {
    std::size_t setting = 0;  // 1..6, 0 for a standalone evaluation
    double accuracy = 0.0;
    double tp = 0.0;
    double fpr_target = 0.0;
    bool low_support = false;
    double psnr_db = 0.0;  // recognizer's test-time input vs ground truth
    std::size_t n_pairs = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

/// Full verification protocol for one trained recognizer on the dataset's
/// held-out split: extract flip-concat features for the chosen input
/// variant, then
///   accuracy — k-fold protocol with PCA fit on the training folds' samples
///              only, per fold;
///   tp       — TP at the configured FPR target with one PCA fit on all
///              held-out samples (a ROC needs a single score set);
///   psnr_db  — mean per-image PSNR of the recognizer's input vs ground
///              truth (99 dB cap applies, e.g. for the Hr variant).
/// Throws std::invalid_argument when the dataset has no held-out samples or
/// pairs, or a pair index is out of range.
EvalReport evaluate_verification(JointNetwork& net, const Dataset& data, TestInput input,
                                 const EvalConfig& cfg);

/// One row of the fixed six-setting experiment matrix: which regime the
/// recognizer is trained in and what it consumes at test time. Setting 3
/// additionally routes through a hallucination stack trained separately in
/// the pixel-only regime.
struct SettingSpec {
    std::size_t id;
    TrainMode train_mode;
    TestInput test_input;
};

/// The six-row matrix, ids 1..6 in order:
///   1 frnet-hr / Hr                4 frnet-lr / LrUpscaled
///   2 frnet-hr / LrUpscaled        5 frnet-on-hallucinated / Hallucinated
///   3 frnet-hr / Hallucinated      6 joint / Hallucinated
std::span<const SettingSpec> settings_matrix();

/// Everything the six-setting run needs.
struct SettingsConfig {
    NetConfig net;      // classes must equal the dataset's training classes
    TrainConfig train;  // shared budget/rates; pixel-only training zeroes the
                        // recognition loss weights per its regime
    EvalConfig eval;
};

/// Train the four recognizers and the standalone hallucination stack the
/// matrix needs, evaluate all six settings, and leave full provenance in
/// work_dir: one checkpoint and one metrics CSV per trained model, named by
/// training mode. Settings 1-3 share one recognizer; settings 3 and 5 share
/// the pixel-only hallucination stack. Deterministic for a given config, so
/// a re-run reproduces every artifact byte for byte. Returns the six reports
/// in setting order.
std::vector<EvalReport> run_settings_matrix(const Dataset& data, const SettingsConfig& cfg,
                                            const std::string& work_dir);

/// Write rows as CSV with the header
/// `setting,accuracy,tp,fpr_target,psnr_db,n_pairs,seed,config_hash`
/// (doubles %.17g, config_hash as 16 hex digits). Throws std::runtime_error
/// on I/O failure.
void write_report_csv(const std::string& path, std::span<const EvalReport> rows);

}  // namespace jfr
