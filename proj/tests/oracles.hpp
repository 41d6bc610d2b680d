#pragma once

// Reference implementations used only by tests. Everything here is written
// the dumbest possible way (plain index loops, no reuse of library code
// paths) so disagreement with the library points at a real bug.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "jfr/tensor.hpp"

namespace oracle {

inline jfr::Tensor matmul(const jfr::Tensor& a, const jfr::Tensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    jfr::Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a(i, p) * b(p, j);
            out(i, j) = acc;
        }
    return out;
}

// Direct cross-correlation, one scalar at a time.
inline jfr::Tensor conv2d(const jfr::Tensor& x, const jfr::Tensor& w, const jfr::Tensor& bias,
                          std::size_t stride, std::size_t pad) {
    const std::size_t n = x.dim(0), ic = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const std::size_t oc = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
    const std::size_t wo = (ww + 2 * pad - kw) / stride + 1;
    jfr::Tensor out({n, oc, ho, wo});
    for (std::size_t in = 0; in < n; ++in)
        for (std::size_t o = 0; o < oc; ++o)
            for (std::size_t oy = 0; oy < ho; ++oy)
                for (std::size_t ox = 0; ox < wo; ++ox) {
                    double acc = bias[o];
                    for (std::size_t c = 0; c < ic; ++c)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::ptrdiff_t iy =
                                    static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(ww)) continue;
                                acc += w(o, c, ky, kx) * x(in, c, iy, ix);
                            }
                    out(in, o, oy, ox) = acc;
                }
    return out;
}

// Catmull-Rom weight, re-derived here rather than shared with the library.
inline double cubic_weight(double t) {
    const double a = -0.5;
    const double at = std::abs(t);
    if (at <= 1.0) return (a + 2.0) * at * at * at - (a + 3.0) * at * at + 1.0;
    if (at < 2.0) return a * at * at * at - 5.0 * a * at * at + 8.0 * a * at - 4.0 * a;
    return 0.0;
}

// Non-separable bicubic: every output pixel is a direct 4x4 double sum over
// the clamped source neighbourhood.
inline jfr::Tensor bicubic(const jfr::Tensor& img, std::size_t out_h, std::size_t out_w) {
    const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
    jfr::Tensor out({c, out_h, out_w});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t hi) {
        return std::max<std::ptrdiff_t>(0, std::min(v, hi - 1));
    };
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t oy = 0; oy < out_h; ++oy)
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
                const double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
                const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(fy));
                const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(fx));
                double acc = 0.0;
                for (std::ptrdiff_t j = -1; j <= 2; ++j)
                    for (std::ptrdiff_t i = -1; i <= 2; ++i) {
                        const double wy = cubic_weight(fy - static_cast<double>(y0 + j));
                        const double wx = cubic_weight(fx - static_cast<double>(x0 + i));
                        acc += wy * wx *
                               img(ch, static_cast<std::size_t>(clampi(y0 + j, h)),
                                   static_cast<std::size_t>(clampi(x0 + i, w)));
                    }
                out(ch, oy, ox) = acc;
            }
    return out;
}

inline double mse(const jfr::Tensor& a, const jfr::Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

inline double psnr(const jfr::Tensor& a, const jfr::Tensor& b, double peak) {
    const double m = mse(a, b);
    if (m == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(peak * peak / m));
}

// Running (Welford-style) mean, a different summation order than sum()/n.
inline double streaming_mean(const std::vector<double>& v) {
    double m = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) m += (v[i] - m) / static_cast<double>(i + 1);
    return m;
}

// Central finite differences of a scalar function w.r.t. every element of
// `param`, restoring the original value after each probe.
inline jfr::Tensor fd_gradient(const std::function<double()>& f, jfr::Tensor& param, double h) {
    jfr::Tensor grad(param.shape());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double keep = param[i];
        param[i] = keep + h;
        const double fp = f();
        param[i] = keep - h;
        const double fm = f();
        param[i] = keep;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

inline double rel_err(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

inline double max_rel_err(const jfr::Tensor& analytic, const jfr::Tensor& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        worst = std::max(worst, rel_err(analytic[i], numeric[i]));
    }
    return worst;
}

// Accuracy of predicting `same` as (score >= thr), one scalar pass.
inline double accuracy_at(const std::vector<double>& scores, const std::vector<bool>& same,
                          double thr) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if ((scores[i] >= thr) == same[i]) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(scores.size());
}

// Exhaustive threshold search: every midpoint of consecutive sorted unique
// scores plus one sentinel below and above. Returns the best accuracy and the
// lowest threshold achieving it.
struct ThresholdSweep {
    double best_accuracy;
    double best_threshold;
};

inline std::vector<double> threshold_candidates(std::vector<double> scores) {
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    std::vector<double> cand;
    cand.push_back(scores.front() - 1.0);
    for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
        cand.push_back(0.5 * (scores[i] + scores[i + 1]));
    }
    cand.push_back(scores.back() + 1.0);
    return cand;
}

inline ThresholdSweep threshold_sweep(const std::vector<double>& scores,
                                      const std::vector<bool>& same) {
    ThresholdSweep best{-1.0, 0.0};
    for (double thr : threshold_candidates(scores)) {
        const double acc = accuracy_at(scores, same, thr);
        if (acc > best.best_accuracy) best = {acc, thr};
    }
    return best;
}

// Full ROC enumeration: evaluate (FPR, TPR) at every candidate threshold and
// keep the best TPR with FPR <= target.
inline double tp_at_fpr(const std::vector<double>& scores, const std::vector<bool>& same,
                        double fpr_target) {
    std::size_t pos = 0, neg = 0;
    for (bool s : same) (s ? pos : neg)++;
    if (neg == 0) throw std::invalid_argument("tp_at_fpr oracle: no negative pairs");
    double best = 0.0;
    for (double thr : threshold_candidates(scores)) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= thr) (same[i] ? tp : fp)++;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        const double tpr = pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pos);
        if (fpr <= fpr_target) best = std::max(best, tpr);
    }
    return best;
}

}  // namespace oracle
