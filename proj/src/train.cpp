#include "jfr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace jfr {

namespace {

std::size_t milestones_passed(const TrainConfig& cfg, std::uint64_t step) {
    std::size_t m = 0;
    for (std::size_t d : cfg.decay_steps) {
        if (step >= d) ++m;
    }
    return m;
}

// Repeated division rather than pow() so each decayed rate is the exact
// rounding of the previous decade divided by ten.
double decayed(double base, std::size_t milestones) {
    double r = base;
    for (std::size_t i = 0; i < milestones; ++i) r /= 10.0;
    return r;
}

void require_finite(double value, const char* term, std::uint64_t step) {
    if (!std::isfinite(value)) {
        throw std::runtime_error("training aborted at step " + std::to_string(step) +
                                 ": non-finite " + term);
    }
}

void check_labels(std::span<const std::size_t> labels, std::size_t classes,
                  const char* where) {
    for (std::size_t c : labels) {
        if (c >= classes) {
            throw std::invalid_argument(std::string(where) + ": label " + std::to_string(c) +
                                        " outside the network's " + std::to_string(classes) +
                                        " classes");
        }
    }
}

void fire(const TrainHooks* hooks, std::string_view phase) {
    if (hooks != nullptr && hooks->on_phase) hooks->on_phase(phase);
}

void sgd_update(std::vector<ParamRef> params, double lr_srnet, double lr_frnet) {
    for (ParamRef& p : params) {
        const double lr = p.name.starts_with("srnet.") ? lr_srnet : lr_frnet;
        axpy(*p.value, -lr, *p.grad);
    }
}

}  // namespace

TrainMode parse_train_mode(std::string_view name) {
    if (name == "frnet-hr") return TrainMode::FrnetHr;
    if (name == "frnet-lr") return TrainMode::FrnetLr;
    if (name == "srnet-only") return TrainMode::SrnetOnly;
    if (name == "frnet-on-hallucinated") return TrainMode::FrnetOnHallucinated;
    if (name == "joint") return TrainMode::Joint;
    throw std::invalid_argument(
        "unknown training mode \"" + std::string(name) +
        "\" (expected frnet-hr, frnet-lr, srnet-only, frnet-on-hallucinated, or joint)");
}

std::string_view to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::FrnetHr: return "frnet-hr";
        case TrainMode::FrnetLr: return "frnet-lr";
        case TrainMode::SrnetOnly: return "srnet-only";
        case TrainMode::FrnetOnHallucinated: return "frnet-on-hallucinated";
        case TrainMode::Joint: return "joint";
    }
    throw std::invalid_argument("invalid TrainMode value");
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lr_srnet > 0.0)) throw std::invalid_argument("lr_srnet must be > 0");
    if (!(lr_frnet > 0.0)) throw std::invalid_argument("lr_frnet must be > 0");
    if (!(lr_softmax > 0.0)) throw std::invalid_argument("lr_softmax must be > 0");
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
    if (!(weights.alpha >= 0.0) || !(weights.beta1 >= 0.0) || !(weights.beta2 >= 0.0)) {
        throw std::invalid_argument("loss weights must be >= 0");
    }
    for (std::size_t i = 0; i < decay_steps.size(); ++i) {
        if (decay_steps[i] >= total_steps) {
            throw std::invalid_argument("decay step " + std::to_string(decay_steps[i]) +
                                        " must be < total_steps (" +
                                        std::to_string(total_steps) + ")");
        }
        if (i > 0 && decay_steps[i] <= decay_steps[i - 1]) {
            throw std::invalid_argument("decay steps must be strictly increasing");
        }
    }
}

std::pair<double, double> lr_at(const TrainConfig& cfg, std::uint64_t step) {
    const std::size_t m = milestones_passed(cfg, step);
    return {decayed(cfg.lr_srnet, m), decayed(cfg.lr_frnet, m)};
}

Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices,
                 std::span<const std::uint8_t> flips) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
    if (!flips.empty() && flips.size() != indices.size()) {
        throw std::invalid_argument("make_batch: flips length " + std::to_string(flips.size()) +
                                    " does not match " + std::to_string(indices.size()) +
                                    " indices");
    }
    for (std::size_t idx : indices) {
        if (idx >= samples.size()) {
            throw std::invalid_argument("make_batch: index " + std::to_string(idx) +
                                        " outside " + std::to_string(samples.size()) +
                                        " samples");
        }
    }
    const Sample& first = samples[indices[0]];
    if (first.hr.rank() != 3 || first.hr.dim(0) != 3) {
        throw std::invalid_argument("make_batch: samples must be [3,H,W], got " +
                                    shape_str(first.hr));
    }
    const std::size_t n = indices.size();
    const std::size_t h = first.hr.dim(1);
    const std::size_t w = first.hr.dim(2);
    const std::size_t plane = 3 * h * w;

    Batch batch;
    batch.lr_upscaled = Tensor({n, 3, h, w});
    batch.hr = Tensor({n, 3, h, w});
    batch.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = samples[indices[i]];
        if (!s.hr.same_shape(first.hr) || !s.lr_upscaled.same_shape(first.hr)) {
            throw std::invalid_argument("make_batch: sample " + std::to_string(indices[i]) +
                                        " shape " + shape_str(s.hr) +
                                        " disagrees with the batch shape " +
                                        shape_str(first.hr));
        }
        const bool flip = !flips.empty() && flips[i] != 0;
        const Tensor lr = flip ? hflip(s.lr_upscaled) : s.lr_upscaled;
        const Tensor hr = flip ? hflip(s.hr) : s.hr;
        std::copy(lr.data(), lr.data() + plane, batch.lr_upscaled.data() + i * plane);
        std::copy(hr.data(), hr.data() + plane, batch.hr.data() + i * plane);
        batch.labels.push_back(s.label);
    }
    return batch;
}

StepResult train_step(JointNetwork& net, const Batch& batch, const TrainConfig& cfg,
                      TrainMode mode, const TrainHooks* hooks) {
    if (batch.labels.empty()) throw std::invalid_argument("train_step: empty batch");
    if (batch.lr_upscaled.rank() != 4 || batch.hr.rank() != 4 ||
        !batch.lr_upscaled.same_shape(batch.hr) ||
        batch.lr_upscaled.dim(0) != batch.labels.size()) {
        throw std::invalid_argument("train_step: batch tensors must be matching [N,3,H,W] "
                                    "with one label per image");
    }
    check_labels(batch.labels, net.config.classes, "train_step");

    net.centers.gamma = cfg.gamma;
    const std::size_t m = milestones_passed(cfg, net.step);
    const double lr_sr = decayed(cfg.lr_srnet, m);
    const double lr_fr = decayed(cfg.lr_frnet, m);
    const double lr_sm = decayed(cfg.lr_softmax, m);

    StepResult out;
    out.lr_srnet = lr_sr;
    out.lr_frnet = lr_fr;

    switch (mode) {
        case TrainMode::Joint: {
            const JointForward fwd = net.forward(batch.lr_upscaled);
            const CombinedLoss cl =
                combined_loss(fwd.hallucinated, batch.hr, fwd.features, batch.labels,
                              net.softmax, net.centers, cfg.weights);
            require_finite(cl.loss_h, "pixel term (loss_h)", net.step);
            require_finite(cl.loss_c, "classification term (loss_c)", net.step);
            require_finite(cl.loss_d, "center term (loss_d)", net.step);
            require_finite(cl.loss, "total loss", net.step);
            fire(hooks, "loss");

            axpy(net.softmax.weights, -lr_sm, cl.grad_weights);
            axpy(net.softmax.bias, -lr_sm, cl.grad_bias);
            fire(hooks, "softmax_update");

            net.backward(cl.grad_features, cl.grad_pred);
            fire(hooks, "backward");

            sgd_update(net.parameters(), lr_sr, lr_fr);
            fire(hooks, "parameter_update");

            net.centers = center_update(net.centers, fwd.features, batch.labels);
            fire(hooks, "center_update");

            out.loss_total = cl.loss;
            out.loss_h = cl.loss_h;
            out.loss_c = cl.loss_c;
            out.loss_d = cl.loss_d;
            break;
        }
        case TrainMode::SrnetOnly: {
            const Tensor pred = net.srnet.forward(batch.lr_upscaled);
            const HallucinationLoss hl = hallucination_loss(pred, batch.hr);
            require_finite(hl.loss, "pixel term (loss_h)", net.step);
            fire(hooks, "loss");

            net.srnet.backward(scale(hl.grad, cfg.weights.alpha));
            fire(hooks, "backward");

            sgd_update(net.srnet.parameters(), lr_sr, lr_sr);
            fire(hooks, "parameter_update");

            out.loss_h = hl.loss;
            out.loss_total = cfg.weights.alpha * hl.loss;
            break;
        }
        case TrainMode::FrnetHr:
        case TrainMode::FrnetLr:
        case TrainMode::FrnetOnHallucinated: {
            const Tensor* input = &batch.lr_upscaled;
            Tensor hallucinated;
            if (mode == TrainMode::FrnetHr) {
                input = &batch.hr;
            } else if (mode == TrainMode::FrnetOnHallucinated) {
                // The hallucination stack is a frozen preprocessor here: it
                // is run forward only and its parameters never move.
                hallucinated = net.srnet.forward(batch.lr_upscaled);
                input = &hallucinated;
            }
            const Tensor features = net.frnet.forward(*input);
            const SoftmaxLoss sm = softmax_loss(features, batch.labels, net.softmax);
            const CenterLoss ce = center_loss(features, batch.labels, net.centers);
            require_finite(sm.loss, "classification term (loss_c)", net.step);
            require_finite(ce.loss, "center term (loss_d)", net.step);
            fire(hooks, "loss");

            axpy(net.softmax.weights, -lr_sm * cfg.weights.beta1, sm.grad_weights);
            axpy(net.softmax.bias, -lr_sm * cfg.weights.beta1, sm.grad_bias);
            fire(hooks, "softmax_update");

            Tensor grad_features = scale(sm.grad_features, cfg.weights.beta1);
            axpy(grad_features, cfg.weights.beta2, ce.grad_features);
            net.frnet.backward(grad_features);
            fire(hooks, "backward");

            sgd_update(net.frnet.parameters(), lr_fr, lr_fr);
            fire(hooks, "parameter_update");

            net.centers = center_update(net.centers, features, batch.labels);
            fire(hooks, "center_update");

            out.loss_c = sm.loss;
            out.loss_d = ce.loss;
            out.loss_total = cfg.weights.beta1 * sm.loss + cfg.weights.beta2 * ce.loss;
            break;
        }
    }

    net.step += 1;
    return out;
}

TrainResult train(JointNetwork& net, const Dataset& data, const TrainConfig& cfg,
                  TrainMode mode, const TrainHooks* hooks) {
    cfg.validate();
    if (data.train.empty()) {
        throw std::invalid_argument("train: dataset has no training samples");
    }
    std::vector<std::size_t> labels;
    labels.reserve(data.train.size());
    for (const Sample& s : data.train) labels.push_back(s.label);
    check_labels(labels, net.config.classes, "train");

    TrainResult result;
    if (net.step >= cfg.total_steps) return result;
    result.log.reserve(cfg.total_steps - net.step);

    const Rng root(cfg.seed);
    Rng order_rng = root.split(1);
    Rng flip_rng = root.split(2);

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();  // forces a shuffle before the first batch

    std::vector<std::size_t> indices;
    std::vector<std::uint8_t> flips;
    while (net.step < cfg.total_steps) {
        if (cursor == order.size()) {
            order_rng.shuffle(order);
            cursor = 0;
        }
        const std::size_t take = std::min(cfg.batch_size, order.size() - cursor);
        indices.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                       order.begin() + static_cast<std::ptrdiff_t>(cursor + take));
        cursor += take;
        flips.clear();
        for (std::size_t i = 0; i < take; ++i) {
            flips.push_back(static_cast<std::uint8_t>(flip_rng.next_below(2)));
        }

        const Batch batch = make_batch(data.train, indices, flips);
        const std::uint64_t step_index = net.step;
        const StepResult r = train_step(net, batch, cfg, mode, hooks);
        result.log.push_back({step_index, r.loss_total, r.loss_h, r.loss_c, r.loss_d,
                              r.lr_srnet, r.lr_frnet});
        if (hooks && hooks->on_step) hooks->on_step(result.log.back());
    }
    return result;
}

void write_metrics_csv(const std::string& path, std::span<const TrainLogRow> rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open metrics log for writing: " + path);
    out << "step,loss_total,loss_h,loss_c,loss_d,lr_sr,lr_fr\n";
    char line[512];
    for (const TrainLogRow& r : rows) {
        std::snprintf(line, sizeof(line), "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(r.step), r.loss_total, r.loss_h,
                      r.loss_c, r.loss_d, r.lr_sr, r.lr_fr);
        out << line;
    }
    out.flush();
    if (!out) throw std::runtime_error("failed writing metrics log: " + path);
}

}  // namespace jfr
