#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "jfr/layers.hpp"
#include "jfr/losses.hpp"
#include "jfr/rng.hpp"
#include "jfr/tensor.hpp"

namespace jfr {

/// Architecture knobs for the two sub-networks. The full-scale preset follows
/// the reference tables exactly; the desk preset shrinks everything so a CPU
/// can train in minutes while every layer type stays exercised.
struct NetConfig {
    std::size_t input_height = 32;
    std::size_t input_width = 28;
    /// Divides the recognition stage widths (64,128,256,512) and the
    /// hallucination hidden widths (64,32); results clamp to >= 1.
    std::size_t channel_divisor = 8;
    std::array<std::size_t, 4> blocks = {1, 1, 1, 1};  // residual blocks per stage
    std::size_t feature_dim = 64;
    std::size_t classes = 2;
    std::array<std::size_t, 3> srnet_kernels = {9, 1, 1};
    /// Stage 3x3 convs: the full-scale tables use pad 0; small inputs need
    /// pad 1 to survive the four pooling halvings.
    std::size_t stage_conv_pad = 1;

    static NetConfig paper_scale(std::size_t classes);
    static NetConfig desk_scale(std::size_t classes);

    /// Throws std::invalid_argument on inconsistent settings (input dims not
    /// divisible by 4, zero counts, even hallucination kernels).
    void validate() const;

    std::size_t stage_channels(std::size_t stage) const;  // stage in [0,4)
    std::size_t srnet_hidden(std::size_t layer) const;    // layer in [0,2)

    bool operator==(const NetConfig&) const = default;
};

/// Three convolutions (kernel sizes per cfg), ReLU after the first two,
/// linear output, "same" padding throughout so the output aligns with the
/// ground-truth image pixel for pixel.
Network build_srnet(const NetConfig& cfg, Rng* rng = nullptr);

/// Four stages of [3x3 conv -> ReLU -> 2x2/2 max-pool -> residual blocks],
/// then global average pooling and a fully-connected feature head.
Network build_frnet(const NetConfig& cfg, Rng* rng = nullptr);

struct JointForward {
    Tensor hallucinated;  // [N,3,H,W]
    Tensor features;      // [N, feature_dim]
};

/// The cascaded pair plus the classifier head and class centers. The two
/// stacks are spliced: forward feeds the hallucinated image straight into
/// the recognition stack, backward lets an extra pixel-space gradient be
/// injected at that point.
class JointNetwork {
public:
    /// Zero-initialized parameters; call init() for random ones.
    JointNetwork(const NetConfig& cfg, double gamma);

    void init(Rng& rng);

    JointForward forward(const Tensor& lr_upscaled);

    /// Backprop grad_features through the recognition stack, add
    /// grad_hallucinated_injection at the splice, continue through the
    /// hallucination stack. Returns the gradient w.r.t. the input image.
    Tensor backward(const Tensor& grad_features, const Tensor& grad_hallucinated_injection);

    /// SGD-updatable layer parameters, names prefixed "srnet." / "frnet.".
    std::vector<ParamRef> parameters();

    /// Smallest smoothness margin across both stacks, valid after forward().
    double kink_margin() const { return std::min(srnet.kink_margin(), frnet.kink_margin()); }

    /// Hash of every discrete branch decision (ReLU gates, pooling argmax
    /// choices) taken by the last forward across both stacks.
    std::uint64_t branch_fingerprint() const {
        std::uint64_t fnv = 0xcbf29ce484222325ull;
        srnet.fold_branch_state(fnv);
        frnet.fold_branch_state(fnv);
        return fnv;
    }

    /// Everything persisted in a checkpoint, in a fixed order: layer
    /// parameters, then softmax.weight/softmax.bias, then centers.m.
    std::vector<std::pair<std::string, Tensor*>> named_tensors();

    NetConfig config;
    Network srnet;
    Network frnet;
    SoftmaxParams softmax;
    CenterBank centers;
    std::uint64_t step = 0;
};

/// Binary checkpoint: magic, format version, a canonical JSON manifest
/// (config, gamma, step, tensor name order), then the tensors. Re-saving a
/// loaded checkpoint reproduces the file byte for byte.
void save_checkpoint(JointNetwork& net, const std::string& path);
JointNetwork load_checkpoint(const std::string& path);

}  // namespace jfr
