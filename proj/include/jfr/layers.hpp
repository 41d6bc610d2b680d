#pragma once

#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "jfr/rng.hpp"
#include "jfr/tensor.hpp"

namespace jfr {

/// Named view of one parameter tensor and its gradient slot.
struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

/// A network layer with hand-written forward and backward passes.
///
/// forward() caches whatever the backward pass needs and arms a freshness
/// flag; backward() consumes it. Calling backward without a matching forward
/// throws. Gradients are written (not accumulated) into the layer's grad
/// tensors on each backward, summed over the batch.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string_view kind() const = 0;

    /// x is [N,C,H,W] for spatial layers, [N,D] for Fc. Caches for backward.
    virtual Tensor forward(const Tensor& x) = 0;

    /// grad_out must match the last forward's output shape. Returns the
    /// gradient w.r.t. that forward's input.
    virtual Tensor backward(const Tensor& grad_out) = 0;

    /// Output shape for a given input shape, without running anything.
    virtual std::vector<std::size_t> output_shape(std::span<const std::size_t> in) const = 0;

    /// Parameters plus matching gradient slots, names prefixed by `prefix`.
    virtual void collect_params(const std::string&, std::vector<ParamRef>&) {}

    /// Distance from the last forward to the nearest non-smooth point of
    /// this layer's function: min |input| for Relu, min gap between the two
    /// largest window entries for MaxPool2d, infinity for smooth layers.
    /// Finite-difference checks are only trustworthy when every margin in
    /// the stack comfortably exceeds the step size.
    virtual double kink_margin() const { return std::numeric_limits<double>::infinity(); }

    /// Folds the discrete branch decisions of the last forward (ReLU gates,
    /// pooling argmax choices) into an FNV-1a accumulator. Two forwards with
    /// the same fingerprint evaluated the same smooth piece of the function.
    virtual void fold_branch_state(std::uint64_t&) const {}

    bool has_fresh_forward() const { return fresh_; }

protected:
    void arm() { fresh_ = true; }
    void consume(const char* who);

    bool fresh_ = false;
};

// ---- concrete layers --------------------------------------------------------

/// 2-D convolution (cross-correlation) with per-output-channel bias.
/// weights [out_ch, in_ch, kh, kw], input [N, in_ch, H, W].
class Conv2d final : public Layer {
public:
    Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
           std::size_t stride, std::size_t pad);

    std::string_view kind() const override { return "conv"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(std::span<const std::size_t> in) const override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;

    void init(Rng& rng);  // weights ~ N(0, sqrt(2/fan_in)), biases 0

    Tensor weights;  // [out_ch, in_ch, kh, kw]
    Tensor bias;     // [out_ch]
    Tensor grad_weights;
    Tensor grad_bias;

    std::size_t in_ch() const { return in_ch_; }
    std::size_t out_ch() const { return out_ch_; }

private:
    std::size_t in_ch_, out_ch_, kh_, kw_, stride_, pad_;
    Tensor cached_input_;
};

class Relu final : public Layer {
public:
    std::string_view kind() const override { return "relu"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(std::span<const std::size_t> in) const override {
        return {in.begin(), in.end()};
    }
    double kink_margin() const override { return margin_; }
    void fold_branch_state(std::uint64_t& fnv) const override;

private:
    Tensor cached_input_;
    double margin_ = std::numeric_limits<double>::infinity();
};

/// Max pooling; backward routes each output gradient to the single cached
/// argmax position (lowest index wins ties).
class MaxPool2d final : public Layer {
public:
    MaxPool2d(std::size_t window, std::size_t stride);

    std::string_view kind() const override { return "maxpool"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(std::span<const std::size_t> in) const override;
    double kink_margin() const override { return margin_; }
    void fold_branch_state(std::uint64_t& fnv) const override;

private:
    std::size_t window_, stride_;
    std::vector<std::size_t> argmax_;  // flat input index per output element
    std::vector<std::size_t> in_shape_;
    double margin_ = std::numeric_limits<double>::infinity();
};

/// Two 3x3 same-channel convolutions with a skip connection:
/// y = x + conv2(relu(conv1(x))). The sum is left un-activated.
class ResidualBlock final : public Layer {
public:
    explicit ResidualBlock(std::size_t channels);

    std::string_view kind() const override { return "residual"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(std::span<const std::size_t> in) const override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    double kink_margin() const override { return relu.kink_margin(); }
    void fold_branch_state(std::uint64_t& fnv) const override { relu.fold_branch_state(fnv); }

    void init(Rng& rng);

    Conv2d conv1;
    Relu relu;
    Conv2d conv2;
};

/// Spatial mean per channel: [N,C,H,W] -> [N,C].
class GlobalAvgPool final : public Layer {
public:
    std::string_view kind() const override { return "gap"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(std::span<const std::size_t> in) const override;

private:
    std::vector<std::size_t> in_shape_;
};

/// Fully-connected (inner product): [N,in] -> [N,out].
class Fc final : public Layer {
public:
    Fc(std::size_t in_dim, std::size_t out_dim);

    std::string_view kind() const override { return "fc"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> output_shape(std::span<const std::size_t> in) const override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;

    void init(Rng& rng);

    Tensor weights;  // [out_dim, in_dim]
    Tensor bias;     // [out_dim]
    Tensor grad_weights;
    Tensor grad_bias;

private:
    std::size_t in_dim_, out_dim_;
    Tensor cached_input_;
};

// ---- layer stack ------------------------------------------------------------

/// Ordered stack of layers with named parameters.
class Network {
public:
    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    void append(std::string name, std::unique_ptr<Layer> layer);

    Tensor forward(const Tensor& x);
    /// Backprop through the whole stack; returns the gradient w.r.t. the input.
    Tensor backward(const Tensor& grad_out);

    std::vector<ParamRef> parameters();
    std::size_t parameter_count();

    std::vector<std::size_t> output_shape(std::span<const std::size_t> in) const;
    /// Per-layer output shapes for a given input; used by the shape audit.
    std::vector<std::vector<std::size_t>> shape_chain(std::span<const std::size_t> in) const;

    /// Smallest kink_margin across the stack, valid after a forward pass.
    double kink_margin() const;

    /// Folds every layer's branch decisions, in order; see Layer.
    void fold_branch_state(std::uint64_t& fnv) const;

    std::size_t depth() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }
    const std::string& layer_name(std::size_t i) const { return names_[i]; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::string> names_;
};

}  // namespace jfr
