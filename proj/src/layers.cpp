#include "jfr/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jfr {

namespace {

void require_rank4(const Tensor& x, const char* who) {
    if (x.rank() != 4) {
        throw std::invalid_argument(std::string(who) + ": expected [N,C,H,W], got " +
                                    shape_str(x));
    }
}

/// floor((in + 2*pad - k) / stride) + 1, guarded against collapse to zero.
std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                         const char* who) {
    const std::size_t padded = in + 2 * pad;
    if (padded < k) {
        throw std::invalid_argument(std::string(who) + ": window " + std::to_string(k) +
                                    " exceeds padded input extent " + std::to_string(padded));
    }
    return (padded - k) / stride + 1;
}

}  // namespace

void Layer::consume(const char* who) {
    if (!fresh_) {
        throw std::runtime_error(std::string(who) +
                                 ": backward without a matching forward (stale cache)");
    }
    fresh_ = false;
}

// ---- Conv2d ------------------------------------------------------------------

Conv2d::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
               std::size_t stride, std::size_t pad)
    : weights({out_ch, in_ch, kh, kw}),
      bias({out_ch}),
      grad_weights({out_ch, in_ch, kh, kw}),
      grad_bias({out_ch}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kh_(kh),
      kw_(kw),
      stride_(stride),
      pad_(pad) {
    if (kh == 0 || kw == 0) throw std::invalid_argument("conv kernel dims must be >= 1");
    if (stride == 0) throw std::invalid_argument("conv stride must be >= 1");
}

void Conv2d::init(Rng& rng) {
    const double fan_in = static_cast<double>(in_ch_ * kh_ * kw_);
    weights = rng.normal_tensor(weights.shape(), 0.0, std::sqrt(2.0 / fan_in));
    bias.fill(0.0);
}

std::vector<std::size_t> Conv2d::output_shape(std::span<const std::size_t> in) const {
    if (in.size() != 4) throw std::invalid_argument("conv: expected [N,C,H,W] input shape");
    if (in[1] != in_ch_) {
        throw std::invalid_argument("conv: input has " + std::to_string(in[1]) +
                                    " channels, layer expects " + std::to_string(in_ch_));
    }
    return {in[0], out_ch_, conv_out_dim(in[2], kh_, stride_, pad_, "conv"),
            conv_out_dim(in[3], kw_, stride_, pad_, "conv")};
}

Tensor Conv2d::forward(const Tensor& x) {
    require_rank4(x, "conv_forward");
    const auto out_shape = output_shape(x.shape());
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t ho = out_shape[2], wo = out_shape[3];

    Tensor out(out_shape);
    double* po = out.data();
    const double* px = x.data();
    const double* pw = weights.data();

    for (std::size_t in = 0; in < n; ++in) {
        for (std::size_t oc = 0; oc < out_ch_; ++oc) {
            double* out_plane = po + (in * out_ch_ + oc) * ho * wo;
            const double b = bias[oc];
            for (std::size_t i = 0; i < ho * wo; ++i) out_plane[i] = b;
            for (std::size_t ic = 0; ic < in_ch_; ++ic) {
                const double* in_plane = px + (in * in_ch_ + ic) * h * w;
                const double* kplane = pw + (oc * in_ch_ + ic) * kh_ * kw_;
                for (std::size_t ky = 0; ky < kh_; ++ky) {
                    for (std::size_t kx = 0; kx < kw_; ++kx) {
                        const double wgt = kplane[ky * kw_ + kx];
                        if (wgt == 0.0) continue;
                        // iy = oy*stride + ky - pad must land in [0, h)
                        for (std::size_t oy = 0; oy < ho; ++oy) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                                static_cast<std::ptrdiff_t>(pad_);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            const double* in_row = in_plane + iy * w;
                            double* out_row = out_plane + oy * wo;
                            for (std::size_t ox = 0; ox < wo; ++ox) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                    static_cast<std::ptrdiff_t>(pad_);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                out_row[ox] += wgt * in_row[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    cached_input_ = x;
    arm();
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    consume("conv_backward");
    const Tensor& x = cached_input_;
    const auto expect = output_shape(x.shape());
    if (grad_out.shape() != expect) {
        throw std::invalid_argument("conv_backward: grad shape " + shape_str(grad_out) +
                                    " does not match forward output " + shape_str(expect));
    }
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t ho = expect[2], wo = expect[3];

    Tensor grad_in(x.shape());
    grad_weights.fill(0.0);
    grad_bias.fill(0.0);

    const double* px = x.data();
    const double* pg = grad_out.data();
    const double* pw = weights.data();
    double* pgi = grad_in.data();
    double* pgw = grad_weights.data();

    for (std::size_t in = 0; in < n; ++in) {
        for (std::size_t oc = 0; oc < out_ch_; ++oc) {
            const double* g_plane = pg + (in * out_ch_ + oc) * ho * wo;
            double acc_b = 0.0;
            for (std::size_t i = 0; i < ho * wo; ++i) acc_b += g_plane[i];
            grad_bias[oc] += acc_b;

            for (std::size_t ic = 0; ic < in_ch_; ++ic) {
                const double* in_plane = px + (in * in_ch_ + ic) * h * w;
                double* gi_plane = pgi + (in * in_ch_ + ic) * h * w;
                const double* kplane = pw + (oc * in_ch_ + ic) * kh_ * kw_;
                double* gw_plane = pgw + (oc * in_ch_ + ic) * kh_ * kw_;
                for (std::size_t ky = 0; ky < kh_; ++ky) {
                    for (std::size_t kx = 0; kx < kw_; ++kx) {
                        const double wgt = kplane[ky * kw_ + kx];
                        double acc_w = 0.0;
                        for (std::size_t oy = 0; oy < ho; ++oy) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                                static_cast<std::ptrdiff_t>(pad_);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            const double* in_row = in_plane + iy * w;
                            double* gi_row = gi_plane + iy * w;
                            const double* g_row = g_plane + oy * wo;
                            for (std::size_t ox = 0; ox < wo; ++ox) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                    static_cast<std::ptrdiff_t>(pad_);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                const double g = g_row[ox];
                                acc_w += in_row[ix] * g;
                                gi_row[ix] += wgt * g;
                            }
                        }
                        gw_plane[ky * kw_ + kx] += acc_w;
                    }
                }
            }
        }
    }
    return grad_in;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + "weight", &weights, &grad_weights});
    out.push_back({prefix + "bias", &bias, &grad_bias});
}

// ---- Relu --------------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
    Tensor out = x;
    margin_ = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.size(); ++i) {
        margin_ = std::min(margin_, std::abs(out[i]));
        if (out[i] < 0.0) out[i] = 0.0;
    }
    cached_input_ = x;
    arm();
    return out;
}

Tensor Relu::backward(const Tensor& grad_out) {
    consume("relu_backward");
    if (!grad_out.same_shape(cached_input_)) {
        throw std::invalid_argument("relu_backward: grad shape " + shape_str(grad_out) +
                                    " does not match input " + shape_str(cached_input_));
    }
    Tensor grad_in = grad_out;
    // Gate is 1{x > 0}; the kink at exactly zero passes nothing.
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        if (cached_input_[i] <= 0.0) grad_in[i] = 0.0;
    }
    return grad_in;
}

// ---- MaxPool2d ----------------------------------------------------------------

MaxPool2d::MaxPool2d(std::size_t window, std::size_t stride)
    : window_(window), stride_(stride) {
    if (window == 0 || stride == 0) {
        throw std::invalid_argument("maxpool window and stride must be >= 1");
    }
}

std::vector<std::size_t> MaxPool2d::output_shape(std::span<const std::size_t> in) const {
    if (in.size() != 4) throw std::invalid_argument("maxpool: expected [N,C,H,W]");
    return {in[0], in[1], conv_out_dim(in[2], window_, stride_, 0, "maxpool"),
            conv_out_dim(in[3], window_, stride_, 0, "maxpool")};
}

Tensor MaxPool2d::forward(const Tensor& x) {
    require_rank4(x, "maxpool_forward");
    const auto out_shape = output_shape(x.shape());
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t ho = out_shape[2], wo = out_shape[3];

    Tensor out(out_shape);
    argmax_.assign(out.size(), 0);
    const double* px = x.data();
    margin_ = std::numeric_limits<double>::infinity();

    std::size_t o = 0;
    for (std::size_t in = 0; in < n; ++in) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            const double* plane = px + (in * c + ic) * h * w;
            const std::size_t plane_base = (in * c + ic) * h * w;
            for (std::size_t oy = 0; oy < ho; ++oy) {
                for (std::size_t ox = 0; ox < wo; ++ox, ++o) {
                    const std::size_t y0 = oy * stride_, x0 = ox * stride_;
                    double best = -std::numeric_limits<double>::infinity();
                    double second = best;
                    std::size_t best_ix = y0 * w + x0;
                    for (std::size_t ky = 0; ky < window_; ++ky) {
                        for (std::size_t kx = 0; kx < window_; ++kx) {
                            const std::size_t ix = (y0 + ky) * w + (x0 + kx);
                            const double v = plane[ix];
                            if (v > best) {  // strict: ties keep lowest index
                                second = best;
                                best = v;
                                best_ix = ix;
                            } else if (v > second) {
                                second = v;
                            }
                        }
                    }
                    out[o] = best;
                    argmax_[o] = plane_base + best_ix;
                    // A window whose two largest entries are both exactly zero
                    // is a clamped plateau (rectified inputs pinned at zero stay
                    // zero under small perturbations; every branch is locally
                    // the constant 0), not a tie boundary. Tied nonzero values
                    // are a genuine switching hazard and report margin 0.
                    if (window_ > 1 && !(best == 0.0 && second == 0.0))
                        margin_ = std::min(margin_, best - second);
                }
            }
        }
    }
    in_shape_ = x.shape();
    arm();
    return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
    consume("maxpool_backward");
    if (grad_out.size() != argmax_.size()) {
        throw std::invalid_argument("maxpool_backward: grad size does not match forward output");
    }
    Tensor grad_in(in_shape_);
    for (std::size_t o = 0; o < argmax_.size(); ++o) {
        grad_in[argmax_[o]] += grad_out[o];
    }
    return grad_in;
}

// ---- ResidualBlock -------------------------------------------------------------

ResidualBlock::ResidualBlock(std::size_t channels)
    : conv1(channels, channels, 3, 3, 1, 1), conv2(channels, channels, 3, 3, 1, 1) {}

void ResidualBlock::init(Rng& rng) {
    conv1.init(rng);
    conv2.init(rng);
}

std::vector<std::size_t> ResidualBlock::output_shape(std::span<const std::size_t> in) const {
    // pad-1 3x3 convs preserve the spatial dims; output shape == input shape.
    return conv2.output_shape(conv1.output_shape(in));
}

Tensor ResidualBlock::forward(const Tensor& x) {
    Tensor y = conv2.forward(relu.forward(conv1.forward(x)));
    if (!y.same_shape(x)) {
        throw std::runtime_error("residual block changed shape: " + shape_str(x) + " -> " +
                                 shape_str(y));
    }
    add_inplace(y, x);
    arm();
    return y;
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
    consume("residual_backward");
    Tensor branch = conv1.backward(relu.backward(conv2.backward(grad_out)));
    add_inplace(branch, grad_out);  // skip connection
    return branch;
}

void ResidualBlock::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    conv1.collect_params(prefix + "conv1.", out);
    conv2.collect_params(prefix + "conv2.", out);
}

// ---- GlobalAvgPool --------------------------------------------------------------

std::vector<std::size_t> GlobalAvgPool::output_shape(std::span<const std::size_t> in) const {
    if (in.size() != 4) throw std::invalid_argument("gap: expected [N,C,H,W]");
    return {in[0], in[1]};
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    require_rank4(x, "gap_forward");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor out({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
        const double* plane = x.data() + i * hw;
        double acc = 0.0;
        for (std::size_t j = 0; j < hw; ++j) acc += plane[j];
        out[i] = acc / static_cast<double>(hw);
    }
    in_shape_ = x.shape();
    arm();
    return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
    consume("gap_backward");
    const std::size_t hw = in_shape_[2] * in_shape_[3];
    if (grad_out.rank() != 2 || grad_out.dim(0) != in_shape_[0] ||
        grad_out.dim(1) != in_shape_[1]) {
        throw std::invalid_argument("gap_backward: grad shape " + shape_str(grad_out) +
                                    " does not match forward");
    }
    Tensor grad_in(in_shape_);
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        double* plane = grad_in.data() + i * hw;
        const double g = grad_out[i] * inv;
        for (std::size_t j = 0; j < hw; ++j) plane[j] = g;
    }
    return grad_in;
}

// ---- Fc -------------------------------------------------------------------------

Fc::Fc(std::size_t in_dim, std::size_t out_dim)
    : weights({out_dim, in_dim}),
      bias({out_dim}),
      grad_weights({out_dim, in_dim}),
      grad_bias({out_dim}),
      in_dim_(in_dim),
      out_dim_(out_dim) {}

void Fc::init(Rng& rng) {
    weights = rng.normal_tensor(weights.shape(), 0.0, std::sqrt(2.0 / static_cast<double>(in_dim_)));
    bias.fill(0.0);
}

std::vector<std::size_t> Fc::output_shape(std::span<const std::size_t> in) const {
    if (in.size() != 2) throw std::invalid_argument("fc: expected [N,D] input shape");
    if (in[1] != in_dim_) {
        throw std::invalid_argument("fc: input dim " + std::to_string(in[1]) +
                                    " does not match layer in_dim " + std::to_string(in_dim_));
    }
    return {in[0], out_dim_};
}

Tensor Fc::forward(const Tensor& x) {
    const auto out_shape = output_shape(x.shape());
    const std::size_t n = x.dim(0);
    Tensor out(out_shape);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = x.data() + i * in_dim_;
        double* orow = out.data() + i * out_dim_;
        for (std::size_t o = 0; o < out_dim_; ++o) {
            const double* wr = weights.data() + o * in_dim_;
            double acc = bias[o];
            for (std::size_t j = 0; j < in_dim_; ++j) acc += wr[j] * xr[j];
            orow[o] = acc;
        }
    }
    cached_input_ = x;
    arm();
    return out;
}

Tensor Fc::backward(const Tensor& grad_out) {
    consume("fc_backward");
    const std::size_t n = cached_input_.dim(0);
    if (grad_out.rank() != 2 || grad_out.dim(0) != n || grad_out.dim(1) != out_dim_) {
        throw std::invalid_argument("fc_backward: grad shape " + shape_str(grad_out) +
                                    " does not match forward output");
    }
    Tensor grad_in(cached_input_.shape());
    grad_weights.fill(0.0);
    grad_bias.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = cached_input_.data() + i * in_dim_;
        const double* gr = grad_out.data() + i * out_dim_;
        double* gi = grad_in.data() + i * in_dim_;
        for (std::size_t o = 0; o < out_dim_; ++o) {
            const double g = gr[o];
            grad_bias[o] += g;
            const double* wr = weights.data() + o * in_dim_;
            double* gw = grad_weights.data() + o * in_dim_;
            for (std::size_t j = 0; j < in_dim_; ++j) {
                gw[j] += g * xr[j];
                gi[j] += g * wr[j];
            }
        }
    }
    return grad_in;
}

void Fc::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + "weight", &weights, &grad_weights});
    out.push_back({prefix + "bias", &bias, &grad_bias});
}

// ---- Network ---------------------------------------------------------------------

void Network::append(std::string name, std::unique_ptr<Layer> layer) {
    names_.push_back(std::move(name));
    layers_.push_back(std::move(layer));
}

Tensor Network::forward(const Tensor& x) {
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur);
    return cur;
}

Tensor Network::backward(const Tensor& grad_out) {
    Tensor cur = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) cur = layers_[i]->backward(cur);
    return cur;
}

namespace {
void fnv_fold(std::uint64_t& fnv, std::uint64_t value) {
    for (int b = 0; b < 8; ++b) {
        fnv ^= (value >> (8 * b)) & 0xffu;
        fnv *= 0x100000001b3ull;
    }
}
}  // namespace

void Relu::fold_branch_state(std::uint64_t& fnv) const {
    std::uint64_t word = 0;
    std::size_t filled = 0;
    for (std::size_t i = 0; i < cached_input_.size(); ++i) {
        word = (word << 1) | (cached_input_[i] > 0.0 ? 1u : 0u);
        if (++filled == 64) {
            fnv_fold(fnv, word);
            word = 0;
            filled = 0;
        }
    }
    if (filled != 0) fnv_fold(fnv, word);
}

void MaxPool2d::fold_branch_state(std::uint64_t& fnv) const {
    for (std::size_t ix : argmax_) fnv_fold(fnv, ix);
}

double Network::kink_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& layer : layers_) m = std::min(m, layer->kink_margin());
    return m;
}

void Network::fold_branch_state(std::uint64_t& fnv) const {
    for (const auto& layer : layers_) layer->fold_branch_state(fnv);
}

std::vector<ParamRef> Network::parameters() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->collect_params(names_[i] + ".", out);
    }
    return out;
}

std::size_t Network::parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.value->size();
    return n;
}

std::vector<std::size_t> Network::output_shape(std::span<const std::size_t> in) const {
    std::vector<std::size_t> cur(in.begin(), in.end());
    for (const auto& layer : layers_) cur = layer->output_shape(cur);
    return cur;
}

std::vector<std::vector<std::size_t>> Network::shape_chain(
    std::span<const std::size_t> in) const {
    std::vector<std::vector<std::size_t>> chain;
    std::vector<std::size_t> cur(in.begin(), in.end());
    chain.push_back(cur);
    for (const auto& layer : layers_) {
        cur = layer->output_shape(cur);
        chain.push_back(cur);
    }
    return chain;
}

}  // namespace jfr
