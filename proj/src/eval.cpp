#include "jfr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace jfr {

namespace {

constexpr double kPsnrCapDb = 99.0;

double psnr_flat(const double* a, const double* b, std::size_t n, double peak) {
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

// Midpoints of consecutive sorted unique scores, plus one sentinel below the
// minimum and one above the maximum. Every distinct accept/reject split of
// the score set is represented.
std::vector<double> threshold_candidates(std::span<const ScoredPair> pairs) {
    std::vector<double> scores;
    scores.reserve(pairs.size());
    for (const ScoredPair& p : pairs) scores.push_back(p.score);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    std::vector<double> out;
    out.reserve(scores.size() + 1);
    out.push_back(scores.front() - 1.0);
    for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
        out.push_back(0.5 * (scores[i] + scores[i + 1]));
    }
    out.push_back(scores.back() + 1.0);
    return out;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("psnr: shape mismatch " + shape_str(a) + " vs " +
                                    shape_str(b));
    }
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
    if (a.size() == 0) throw std::invalid_argument("psnr: empty tensors");
    return psnr_flat(a.data(), b.data(), a.size(), peak);
}

Tensor extract_features(JointNetwork& net, const Tensor& images, bool use_srnet) {
    if (images.rank() != 4 || images.dim(1) != 3 ||
        images.dim(2) != net.config.input_height || images.dim(3) != net.config.input_width) {
        throw std::invalid_argument("extract_features: expected [N,3," +
                                    std::to_string(net.config.input_height) + "," +
                                    std::to_string(net.config.input_width) + "], got " +
                                    shape_str(images));
    }
    const Tensor mirrored = hflip(images);
    const Tensor f1 = net.frnet.forward(use_srnet ? net.srnet.forward(images) : images);
    const Tensor f2 = net.frnet.forward(use_srnet ? net.srnet.forward(mirrored) : mirrored);

    const std::size_t n = images.dim(0);
    const std::size_t d = net.config.feature_dim;
    Tensor out({n, 2 * d});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(f1.data() + i * d, f1.data() + (i + 1) * d, out.data() + i * 2 * d);
        std::copy(f2.data() + i * d, f2.data() + (i + 1) * d, out.data() + i * 2 * d + d);
    }
    return out;
}

EigenDecomposition symmetric_eigen(const Tensor& a) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
        throw std::invalid_argument("symmetric_eigen: square matrix required, got " +
                                    shape_str(a));
    }
    const std::size_t d = a.dim(0);
    double scale = 0.0;
    for (double v : a.span()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            if (std::abs(a(i, j) - a(j, i)) > 1e-9 * std::max(1.0, scale)) {
                throw std::invalid_argument("symmetric_eigen: matrix is not symmetric at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }

    // Work on the exactly symmetrized copy; v accumulates the rotations with
    // eigenvectors in its columns.
    Tensor m = a;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double sym = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = m(j, i) = sym;
        }
    }
    Tensor v({d, d});
    for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;

    double frob = 0.0;
    for (double x : m.span()) frob += x * x;
    frob = std::sqrt(frob);
    const double stop = 1e-14 * std::max(frob, 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) off += 2.0 * m(p, q) * m(p, q);
        }
        if (std::sqrt(off) <= stop) break;

        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                const double app = m(p, p), aqq = m(q, q);
                m(p, p) = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                m(q, q) = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                m(p, q) = m(q, p) = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = m(k, p), akq = m(k, q);
                    m(k, p) = m(p, k) = c * akp - s * akq;
                    m(k, q) = m(q, k) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return m(x, x) > m(y, y); });

    EigenDecomposition out;
    out.values = Tensor({d});
    out.vectors = Tensor({d, d});
    for (std::size_t r = 0; r < d; ++r) {
        const std::size_t col = order[r];
        out.values[r] = m(col, col);
        // Deterministic sign: the largest-magnitude coordinate (lowest index
        // on ties) is made positive.
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t k = 0; k < d; ++k) {
            if (std::abs(v(k, col)) > best) {
                best = std::abs(v(k, col));
                arg = k;
            }
        }
        const double sign = v(arg, col) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < d; ++k) out.vectors(r, k) = sign * v(k, col);
    }
    return out;
}

PcaProjection pca_fit(const Tensor& features, std::size_t out_dim) {
    if (features.rank() != 2) {
        throw std::invalid_argument("pca_fit: expected [N,d] features, got " +
                                    shape_str(features));
    }
    const std::size_t n = features.dim(0);
    const std::size_t d = features.dim(1);
    if (out_dim < 1 || out_dim > std::min(n, d)) {
        throw std::invalid_argument("pca_fit: out_dim " + std::to_string(out_dim) +
                                    " outside [1, min(" + std::to_string(n) + "," +
                                    std::to_string(d) + ")]");
    }

    PcaProjection proj;
    proj.mean = Tensor({d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) proj.mean[j] += features(i, j);
    }
    for (std::size_t j = 0; j < d; ++j) proj.mean[j] /= static_cast<double>(n);

    Tensor centered({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) centered(i, j) = features(i, j) - proj.mean[j];
    }
    Tensor cov = matmul(transpose(centered), centered);
    scale_inplace(cov, 1.0 / static_cast<double>(n));

    const EigenDecomposition eig = symmetric_eigen(cov);
    proj.basis = Tensor({out_dim, d});
    proj.eigenvalues = Tensor({out_dim});
    for (std::size_t r = 0; r < out_dim; ++r) {
        proj.eigenvalues[r] = eig.values[r];
        for (std::size_t k = 0; k < d; ++k) proj.basis(r, k) = eig.vectors(r, k);
    }
    proj.total_variance = 0.0;
    for (std::size_t j = 0; j < d; ++j) proj.total_variance += cov(j, j);
    return proj;
}

Tensor pca_project(const PcaProjection& proj, const Tensor& features) {
    const std::size_t d = proj.mean.size();
    if (features.rank() == 1) {
        if (features.size() != d) {
            throw std::invalid_argument("pca_project: expected length " + std::to_string(d) +
                                        ", got " + shape_str(features));
        }
        Tensor one = features.reshaped({1, d});
        return pca_project(proj, one).reshaped({proj.basis.dim(0)});
    }
    if (features.rank() != 2 || features.dim(1) != d) {
        throw std::invalid_argument("pca_project: expected [N," + std::to_string(d) +
                                    "], got " + shape_str(features));
    }
    const std::size_t n = features.dim(0);
    Tensor centered({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) centered(i, j) = features(i, j) - proj.mean[j];
    }
    return matmul(centered, transpose(proj.basis));
}

double cosine_score(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || !a.same_shape(b)) {
        throw std::invalid_argument("cosine_score: two equal-length vectors required, got " +
                                    shape_str(a) + " and " + shape_str(b));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("cosine_score: zero-norm vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<ScoredPair> score_pairs(const Tensor& features,
                                    std::span<const VerificationPair> pairs) {
    if (features.rank() != 2) {
        throw std::invalid_argument("score_pairs: expected [N,k] features, got " +
                                    shape_str(features));
    }
    const std::size_t n = features.dim(0);
    const std::size_t k = features.dim(1);
    std::vector<ScoredPair> out;
    out.reserve(pairs.size());
    for (const VerificationPair& p : pairs) {
        if (p.a >= n || p.b >= n) {
            throw std::invalid_argument("score_pairs: pair index outside " + std::to_string(n) +
                                        " feature rows");
        }
        const double* ra = features.data() + p.a * k;
        const double* rb = features.data() + p.b * k;
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            dot += ra[i] * rb[i];
            na += ra[i] * ra[i];
            nb += rb[i] * rb[i];
        }
        if (na == 0.0 || nb == 0.0) {
            throw std::invalid_argument("score_pairs: zero-norm feature row");
        }
        out.push_back({dot / (std::sqrt(na) * std::sqrt(nb)), p.same});
    }
    return out;
}

double accuracy_at(std::span<const ScoredPair> pairs, double threshold) {
    if (pairs.empty()) throw std::invalid_argument("accuracy_at: empty pair list");
    std::size_t correct = 0;
    for (const ScoredPair& p : pairs) {
        if ((p.score >= threshold) == p.same) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double best_threshold(std::span<const ScoredPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("best_threshold: empty pair list");
    double best_acc = -1.0;
    double best_thr = 0.0;
    for (double thr : threshold_candidates(pairs)) {
        const double acc = accuracy_at(pairs, thr);
        if (acc > best_acc) {
            best_acc = acc;
            best_thr = thr;
        }
    }
    return best_thr;
}

double verification_accuracy(std::span<const ScoredPair> pairs, std::size_t folds) {
    if (folds < 2) throw std::invalid_argument("verification_accuracy: folds must be >= 2");
    if (pairs.size() < 2 * folds) {
        throw std::invalid_argument("verification_accuracy: need at least 2 pairs per fold (" +
                                    std::to_string(pairs.size()) + " pairs for " +
                                    std::to_string(folds) + " folds)");
    }
    bool any_pos = false, any_neg = false;
    for (const ScoredPair& p : pairs) (p.same ? any_pos : any_neg) = true;
    if (!any_pos || !any_neg) {
        throw std::invalid_argument("verification_accuracy: both classes must be present");
    }

    double acc_sum = 0.0;
    std::vector<ScoredPair> train, held_out;
    for (std::size_t f = 0; f < folds; ++f) {
        train.clear();
        held_out.clear();
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            (i % folds == f ? held_out : train).push_back(pairs[i]);
        }
        bool tp = false, tn = false;
        for (const ScoredPair& p : train) (p.same ? tp : tn) = true;
        if (!tp || !tn) {
            throw std::invalid_argument("verification_accuracy: degenerate fold " +
                                        std::to_string(f) +
                                        " (threshold-selection pairs have a single class)");
        }
        acc_sum += accuracy_at(held_out, best_threshold(train));
    }
    return acc_sum / static_cast<double>(folds);
}

TpAtFpr tp_at_fpr(std::span<const ScoredPair> pairs, double fpr_target) {
    if (!(fpr_target > 0.0) || fpr_target > 1.0) {
        throw std::invalid_argument("tp_at_fpr: fpr_target must be in (0,1]");
    }
    std::size_t positives = 0, negatives = 0;
    for (const ScoredPair& p : pairs) (p.same ? positives : negatives) += 1;
    if (negatives == 0) throw std::invalid_argument("tp_at_fpr: no negative pairs");
    if (positives == 0) throw std::invalid_argument("tp_at_fpr: no positive pairs");

    TpAtFpr out;
    out.negatives = negatives;
    out.low_support = static_cast<double>(negatives) * fpr_target < 1.0;
    out.tp = 0.0;
    // The top sentinel rejects everything (FPR 0, TPR 0), so at least one
    // threshold is always admissible.
    bool found = false;
    for (double thr : threshold_candidates(pairs)) {
        std::size_t tp_count = 0, fp_count = 0;
        for (const ScoredPair& p : pairs) {
            if (p.score >= thr) (p.same ? tp_count : fp_count) += 1;
        }
        const double fpr = static_cast<double>(fp_count) / static_cast<double>(negatives);
        const double tpr = static_cast<double>(tp_count) / static_cast<double>(positives);
        if (fpr <= fpr_target && (!found || tpr > out.tp)) {
            out.tp = tpr;
            out.threshold = thr;
            found = true;
        }
    }
    return out;
}

namespace {

// Per-image stack of the variant a setting's recognizer consumes (before any
// hallucination routing, which happens inside feature extraction).
Tensor stack_test_inputs(const Dataset& data, TestInput input, std::size_t start,
                         std::size_t count) {
    const Tensor& first = data.test[start].hr;
    const std::size_t plane = first.size();
    Tensor out({count, first.dim(0), first.dim(1), first.dim(2)});
    for (std::size_t i = 0; i < count; ++i) {
        const Sample& s = data.test[start + i];
        const Tensor& src = (input == TestInput::Hr) ? s.hr : s.lr_upscaled;
        std::copy(src.data(), src.data() + plane, out.data() + i * plane);
    }
    return out;
}

}  // namespace

EvalReport evaluate_verification(JointNetwork& net, const Dataset& data, TestInput input,
                                 const EvalConfig& cfg) {
    if (data.test.empty()) {
        throw std::invalid_argument("evaluate_verification: dataset has no held-out samples");
    }
    if (data.pairs.empty()) {
        throw std::invalid_argument("evaluate_verification: dataset has no verification pairs");
    }
    for (const VerificationPair& p : data.pairs) {
        if (p.a >= data.test.size() || p.b >= data.test.size()) {
            throw std::invalid_argument("evaluate_verification: pair index outside the " +
                                        std::to_string(data.test.size()) + " held-out samples");
        }
    }

    const std::size_t n = data.test.size();
    const std::size_t width = 2 * net.config.feature_dim;
    const bool route = input == TestInput::Hallucinated;
    // Normalized pixels score identically to 8-bit pixels at this peak.
    const double peak = 255.0 / 128.0;

    Tensor features({n, width});
    double psnr_sum = 0.0;
    constexpr std::size_t kChunk = 32;
    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t count = std::min(kChunk, n - start);
        const Tensor imgs = stack_test_inputs(data, input, start, count);
        const Tensor f = extract_features(net, imgs, route);
        std::copy(f.data(), f.data() + count * width, features.data() + start * width);

        const Tensor shown = route ? net.srnet.forward(imgs) : imgs;
        const std::size_t plane = data.test[start].hr.size();
        for (std::size_t i = 0; i < count; ++i) {
            psnr_sum += psnr_flat(shown.data() + i * plane, data.test[start + i].hr.data(),
                                  plane, peak);
        }
    }

    EvalReport report;
    report.fpr_target = cfg.fpr_target;
    report.n_pairs = data.pairs.size();
    report.seed = cfg.seed;
    report.config_hash = cfg.config_hash;
    report.psnr_db = psnr_sum / static_cast<double>(n);

    // TP@FPR wants one ROC, so one projection fitted on every held-out
    // sample.
    {
        const std::size_t k = std::min(cfg.pca_dim, std::min(n, width));
        const PcaProjection proj = pca_fit(features, k);
        const Tensor projected = pca_project(proj, features);
        const std::vector<ScoredPair> scored = score_pairs(projected, data.pairs);
        const TpAtFpr t = tp_at_fpr(scored, cfg.fpr_target);
        report.tp = t.tp;
        report.low_support = t.low_support;
    }

    // Accuracy follows the k-fold protocol with the projection fitted only on
    // samples named by the threshold-selection folds.
    const std::size_t folds = cfg.folds;
    if (folds < 2) throw std::invalid_argument("evaluate_verification: folds must be >= 2");
    if (data.pairs.size() < 2 * folds) {
        throw std::invalid_argument("evaluate_verification: need at least 2 pairs per fold");
    }
    double acc_sum = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::uint8_t> in_train(n, 0);
        std::vector<const VerificationPair*> train_pairs, held_pairs;
        for (std::size_t i = 0; i < data.pairs.size(); ++i) {
            if (i % folds == f) {
                held_pairs.push_back(&data.pairs[i]);
            } else {
                train_pairs.push_back(&data.pairs[i]);
                in_train[data.pairs[i].a] = 1;
                in_train[data.pairs[i].b] = 1;
            }
        }
        std::size_t m = 0;
        for (std::uint8_t b : in_train) m += b;
        Tensor train_feats({m, width});
        std::size_t row = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (in_train[i]) {
                std::copy(features.data() + i * width, features.data() + (i + 1) * width,
                          train_feats.data() + row * width);
                ++row;
            }
        }
        const std::size_t k = std::min(cfg.pca_dim, std::min(m, width));
        const PcaProjection proj = pca_fit(train_feats, k);
        const Tensor projected = pca_project(proj, features);

        auto score_subset = [&](const std::vector<const VerificationPair*>& subset) {
            std::vector<VerificationPair> copy;
            copy.reserve(subset.size());
            for (const VerificationPair* p : subset) copy.push_back(*p);
            return score_pairs(projected, copy);
        };
        const std::vector<ScoredPair> train_scored = score_subset(train_pairs);
        const std::vector<ScoredPair> held_scored = score_subset(held_pairs);
        bool tp = false, tn = false;
        for (const ScoredPair& p : train_scored) (p.same ? tp : tn) = true;
        if (!tp || !tn) {
            throw std::invalid_argument("evaluate_verification: degenerate fold " +
                                        std::to_string(f) +
                                        " (threshold-selection pairs have a single class)");
        }
        acc_sum += accuracy_at(held_scored, best_threshold(train_scored));
    }
    report.accuracy = acc_sum / static_cast<double>(folds);
    return report;
}

TestInput parse_test_input(std::string_view name) {
    if (name == "hr") return TestInput::Hr;
    if (name == "lr-upscaled") return TestInput::LrUpscaled;
    if (name == "hallucinated") return TestInput::Hallucinated;
    throw std::invalid_argument("unknown test input '" + std::string(name) +
                                "' (expected hr, lr-upscaled, or hallucinated)");
}

std::string_view to_string(TestInput input) {
    switch (input) {
        case TestInput::Hr: return "hr";
        case TestInput::LrUpscaled: return "lr-upscaled";
        case TestInput::Hallucinated: return "hallucinated";
    }
    throw std::logic_error("to_string: bad TestInput");
}

std::span<const SettingSpec> settings_matrix() {
    static const SettingSpec kMatrix[6] = {
        {1, TrainMode::FrnetHr, TestInput::Hr},
        {2, TrainMode::FrnetHr, TestInput::LrUpscaled},
        {3, TrainMode::FrnetHr, TestInput::Hallucinated},
        {4, TrainMode::FrnetLr, TestInput::LrUpscaled},
        {5, TrainMode::FrnetOnHallucinated, TestInput::Hallucinated},
        {6, TrainMode::Joint, TestInput::Hallucinated},
    };
    return kMatrix;
}

namespace {

// Train one model for the matrix with its own seed lineage, leaving a
// checkpoint and metrics log in work_dir. adopt_srnet_path seeds the frozen
// preprocessor for the hallucinated-input training regime.
JointNetwork train_model(const Dataset& data, const SettingsConfig& cfg, TrainMode mode,
                         std::uint64_t model_index, const std::string& work_dir,
                         const std::string& adopt_srnet_path = "") {
    JointNetwork net(cfg.net, cfg.train.gamma);
    const Rng root(cfg.eval.seed);
    Rng init_rng = root.split(1000 + model_index);
    net.init(init_rng);
    if (!adopt_srnet_path.empty()) {
        JointNetwork donor = load_checkpoint(adopt_srnet_path);
        net.srnet = std::move(donor.srnet);
    }
    TrainConfig tc = cfg.train;
    tc.seed = root.split(2000 + model_index).next_u64();
    if (mode == TrainMode::SrnetOnly) {
        tc.weights.beta1 = 0.0;  // pure pixel training
        tc.weights.beta2 = 0.0;
    }
    const TrainResult res = train(net, data, tc, mode);
    const std::string stem = work_dir + "/" + std::string(to_string(mode));
    save_checkpoint(net, stem + ".jfck");
    write_metrics_csv(stem + "-metrics.csv", res.log);
    return net;
}

}  // namespace

std::vector<EvalReport> run_settings_matrix(const Dataset& data, const SettingsConfig& cfg,
                                            const std::string& work_dir) {
    cfg.net.validate();
    cfg.train.validate();
    if (cfg.net.classes != data.train_classes) {
        throw std::invalid_argument("run_settings_matrix: recognizer head has " +
                                    std::to_string(cfg.net.classes) +
                                    " classes but the dataset trains on " +
                                    std::to_string(data.train_classes));
    }
    std::filesystem::create_directories(work_dir);

    JointNetwork hr_model = train_model(data, cfg, TrainMode::FrnetHr, 1, work_dir);
    JointNetwork sr_model = train_model(data, cfg, TrainMode::SrnetOnly, 2, work_dir);
    JointNetwork lr_model = train_model(data, cfg, TrainMode::FrnetLr, 3, work_dir);
    JointNetwork hall_model =
        train_model(data, cfg, TrainMode::FrnetOnHallucinated, 4, work_dir,
                    work_dir + "/" + std::string(to_string(TrainMode::SrnetOnly)) + ".jfck");
    JointNetwork joint_model = train_model(data, cfg, TrainMode::Joint, 5, work_dir);

    // The hallucinated-test variant of the plain-HR recognizer: its own
    // recognition stack spliced onto the independently trained pixel-only
    // hallucinator.
    JointNetwork hybrid =
        load_checkpoint(work_dir + "/" + std::string(to_string(TrainMode::FrnetHr)) + ".jfck");
    hybrid.srnet = std::move(sr_model.srnet);

    std::vector<EvalReport> out;
    for (const SettingSpec& row : settings_matrix()) {
        JointNetwork* model = nullptr;
        switch (row.id) {
            case 1:
            case 2: model = &hr_model; break;
            case 3: model = &hybrid; break;
            case 4: model = &lr_model; break;
            case 5: model = &hall_model; break;
            case 6: model = &joint_model; break;
            default: throw std::logic_error("run_settings_matrix: unknown setting id");
        }
        EvalReport report = evaluate_verification(*model, data, row.test_input, cfg.eval);
        report.setting = row.id;
        out.push_back(report);
    }
    return out;
}

void write_report_csv(const std::string& path, std::span<const EvalReport> rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open report for writing: " + path);
    out << "setting,accuracy,tp,fpr_target,psnr_db,n_pairs,seed,config_hash\n";
    char line[512];
    for (const EvalReport& r : rows) {
        std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%zu,%llu,%016llx\n",
                      r.setting, r.accuracy, r.tp, r.fpr_target, r.psnr_db, r.n_pairs,
                      static_cast<unsigned long long>(r.seed),
                      static_cast<unsigned long long>(r.config_hash));
        out << line;
    }
    out.flush();
    if (!out) throw std::runtime_error("failed writing report: " + path);
}

}  // namespace jfr
