#pragma once

#include <span>
#include <vector>

#include "jfr/rng.hpp"
#include "jfr/tensor.hpp"

namespace jfr {

/// Linear classifier head: logits_i = weights * x_i + bias. Row j of
/// `weights` scores class j.
struct SoftmaxParams {
    Tensor weights;  // [classes, dim]
    Tensor bias;     // [classes]

    SoftmaxParams(std::size_t classes, std::size_t dim)
        : weights({classes, dim}), bias({classes}) {}

    std::size_t classes() const { return weights.dim(0); }
    std::size_t dim() const { return weights.dim(1); }

    /// weights ~ N(0, 0.01), bias 0.
    void init(Rng& rng);
};

/// One center vector per class plus the center learning rate.
struct CenterBank {
    Tensor centers;  // [classes, dim]
    double gamma;

    CenterBank(std::size_t classes, std::size_t dim, double gamma_)
        : centers({classes, dim}), gamma(gamma_) {}

    std::size_t classes() const { return centers.dim(0); }
    std::size_t dim() const { return centers.dim(1); }
};

/// Weights of the three loss terms in L = alpha*L_h + beta1*L_c + beta2*L_d.
struct LossWeights {
    double alpha;
    double beta1;
    double beta2;
};

// All loss reductions are sums (not means) over the batch; learning rates in
// configs are therefore batch-size-coupled.

struct HallucinationLoss {
    double loss;
    Tensor grad;  // 2*(pred - gt), same shape as pred
};

/// Pixel reconstruction term: sum of squared differences over the whole batch.
HallucinationLoss hallucination_loss(const Tensor& pred, const Tensor& gt);

struct SoftmaxLoss {
    double loss;
    Tensor grad_features;  // [N, dim]
    Tensor grad_weights;   // [classes, dim]
    Tensor grad_bias;      // [classes]
    Tensor probs;          // [N, classes], row-stochastic
};

/// Multi-class cross-entropy summed over the batch, log-sum-exp stabilized
/// by max subtraction.
SoftmaxLoss softmax_loss(const Tensor& features, std::span<const std::size_t> labels,
                         const SoftmaxParams& params);

struct CenterLoss {
    double loss;
    Tensor grad_features;  // [N, dim]
};

/// Feature-to-center distance term: loss = sum_i ||x_i - m_{c_i}||^2.
///
/// The returned gradient row is (x_i - m_{c_i}) — deliberately half the
/// calculus derivative of the loss; the missing factor 2 is treated as part
/// of the term's weight. Centers are constants here; they move only through
/// center_update.
CenterLoss center_loss(const Tensor& features, std::span<const std::size_t> labels,
                       const CenterBank& bank);

/// One delta step of the center rule:
///   delta_j = sum_{i: c_i=j} (m_j - x_i) / (1 + count_j),  m_j -= gamma*delta_j.
/// Classes absent from the batch keep their center bit-exactly.
CenterBank center_update(const CenterBank& bank, const Tensor& features,
                         std::span<const std::size_t> labels);

struct CombinedLoss {
    double loss;    // alpha*loss_h + beta1*loss_c + beta2*loss_d
    double loss_h;
    double loss_c;
    double loss_d;
    Tensor grad_pred;      // alpha * 2*(pred - gt): injected at the hallucination output
    Tensor grad_features;  // beta1 * dL_c/dx + beta2 * (x - m)
    Tensor grad_weights;   // beta1-scaled softmax parameter gradients
    Tensor grad_bias;
    Tensor probs;
};

/// The full three-term objective with the two gradient streams the training
/// step needs (one entering the recognition stack, one injected at the
/// hallucination output).
CombinedLoss combined_loss(const Tensor& pred, const Tensor& gt, const Tensor& features,
                           std::span<const std::size_t> labels, const SoftmaxParams& params,
                           const CenterBank& bank, const LossWeights& weights);

}  // namespace jfr
