#include "jfr/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace jfr {

namespace {

void require_labels(std::span<const std::size_t> labels, std::size_t batch,
                    std::size_t classes, const char* who) {
    if (labels.size() != batch) {
        throw std::invalid_argument(std::string(who) + ": " + std::to_string(labels.size()) +
                                    " labels for a batch of " + std::to_string(batch));
    }
    for (std::size_t l : labels) {
        if (l >= classes) {
            throw std::invalid_argument(std::string(who) + ": label " + std::to_string(l) +
                                        " out of range for " + std::to_string(classes) +
                                        " classes");
        }
    }
}

void require_features(const Tensor& features, std::size_t dim, const char* who) {
    if (features.rank() != 2 || features.dim(1) != dim) {
        throw std::invalid_argument(std::string(who) + ": expected features [N," +
                                    std::to_string(dim) + "], got " + shape_str(features));
    }
}

}  // namespace

void SoftmaxParams::init(Rng& rng) {
    weights = rng.normal_tensor(weights.shape(), 0.0, 0.01);
    bias.fill(0.0);
}

HallucinationLoss hallucination_loss(const Tensor& pred, const Tensor& gt) {
    if (!pred.same_shape(gt)) {
        throw std::invalid_argument("hallucination_loss: shape mismatch " + shape_str(pred) +
                                    " vs " + shape_str(gt));
    }
    HallucinationLoss out{0.0, Tensor(pred.shape())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        out.loss += d * d;
        out.grad[i] = 2.0 * d;
    }
    return out;
}

SoftmaxLoss softmax_loss(const Tensor& features, std::span<const std::size_t> labels,
                         const SoftmaxParams& params) {
    const std::size_t k = params.classes(), d = params.dim();
    require_features(features, d, "softmax_loss");
    const std::size_t n = features.dim(0);
    require_labels(labels, n, k, "softmax_loss");

    SoftmaxLoss out{0.0, Tensor({n, d}), Tensor({k, d}), Tensor({k}), Tensor({n, k})};

    std::vector<double> logits(k);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = features.data() + i * d;
        double top = -INFINITY;
        for (std::size_t j = 0; j < k; ++j) {
            const double* w = params.weights.data() + j * d;
            double z = params.bias[j];
            for (std::size_t p = 0; p < d; ++p) z += w[p] * x[p];
            logits[j] = z;
            top = std::max(top, z);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(logits[j] - top);
        const double lse = top + std::log(denom);
        out.loss += lse - logits[labels[i]];

        // d(loss_i)/d(logit_j) = p_j - 1{j == label}
        for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(logits[j] - lse);
            out.probs(i, j) = p;
            const double g = p - (j == labels[i] ? 1.0 : 0.0);
            out.grad_bias[j] += g;
            const double* w = params.weights.data() + j * d;
            double* gw = out.grad_weights.data() + j * d;
            double* gx = out.grad_features.data() + i * d;
            for (std::size_t p2 = 0; p2 < d; ++p2) {
                gw[p2] += g * x[p2];
                gx[p2] += g * w[p2];
            }
        }
    }
    return out;
}

CenterLoss center_loss(const Tensor& features, std::span<const std::size_t> labels,
                       const CenterBank& bank) {
    const std::size_t k = bank.classes(), d = bank.dim();
    require_features(features, d, "center_loss");
    const std::size_t n = features.dim(0);
    require_labels(labels, n, k, "center_loss");

    CenterLoss out{0.0, Tensor({n, d})};
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = features.data() + i * d;
        const double* m = bank.centers.data() + labels[i] * d;
        double* g = out.grad_features.data() + i * d;
        for (std::size_t p = 0; p < d; ++p) {
            const double diff = x[p] - m[p];
            out.loss += diff * diff;
            g[p] = diff;
        }
    }
    return out;
}

CenterBank center_update(const CenterBank& bank, const Tensor& features,
                         std::span<const std::size_t> labels) {
    const std::size_t k = bank.classes(), d = bank.dim();
    require_features(features, d, "center_update");
    require_labels(labels, features.dim(0), k, "center_update");

    std::vector<std::size_t> count(k, 0);
    for (std::size_t l : labels) ++count[l];

    CenterBank next = bank;
    for (std::size_t j = 0; j < k; ++j) {
        if (count[j] == 0) continue;  // empty sum: the center must not move
        const double* m = bank.centers.data() + j * d;
        double* out = next.centers.data() + j * d;
        for (std::size_t p = 0; p < d; ++p) {
            double delta = 0.0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == j) delta += m[p] - features(i, p);
            }
            delta /= 1.0 + static_cast<double>(count[j]);
            out[p] = m[p] - bank.gamma * delta;
        }
    }
    return next;
}

CombinedLoss combined_loss(const Tensor& pred, const Tensor& gt, const Tensor& features,
                           std::span<const std::size_t> labels, const SoftmaxParams& params,
                           const CenterBank& bank, const LossWeights& weights) {
    if (weights.alpha < 0.0 || weights.beta1 < 0.0 || weights.beta2 < 0.0) {
        throw std::invalid_argument("combined_loss: loss weights must be >= 0");
    }
    if (pred.dim(0) != features.dim(0)) {
        throw std::invalid_argument("combined_loss: batch mismatch, images " +
                                    std::to_string(pred.dim(0)) + " vs features " +
                                    std::to_string(features.dim(0)));
    }

    HallucinationLoss h = hallucination_loss(pred, gt);
    SoftmaxLoss c = softmax_loss(features, labels, params);
    CenterLoss d = center_loss(features, labels, bank);

    CombinedLoss out{
        weights.alpha * h.loss + weights.beta1 * c.loss + weights.beta2 * d.loss,
        h.loss,
        c.loss,
        d.loss,
        scale(h.grad, weights.alpha),
        scale(c.grad_features, weights.beta1),
        scale(c.grad_weights, weights.beta1),
        scale(c.grad_bias, weights.beta1),
        std::move(c.probs),
    };
    axpy(out.grad_features, weights.beta2, d.grad_features);
    return out;
}

}  // namespace jfr
