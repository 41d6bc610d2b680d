#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "jfr/losses.hpp"
#include "jfr/rng.hpp"
#include "oracles.hpp"

using jfr::CenterBank;
using jfr::SoftmaxParams;
using jfr::Tensor;

TEST_CASE("hallucination loss basics") {
    jfr::Rng rng(1);
    Tensor a = rng.uniform_tensor({2, 3, 4, 4}, -1.0, 1.0);
    auto same = jfr::hallucination_loss(a, a);
    CHECK(same.loss == 0.0);
    for (std::size_t i = 0; i < same.grad.size(); ++i) CHECK(same.grad[i] == 0.0);

    Tensor one({1, 1, 1, 1}, {1.0});
    Tensor zero({1, 1, 1, 1}, {0.0});
    auto unit = jfr::hallucination_loss(one, zero);
    CHECK(unit.loss == 1.0);
    CHECK(unit.grad[0] == 2.0);

    CHECK_THROWS_AS(jfr::hallucination_loss(Tensor({1, 2}), Tensor({2, 1})),
                    std::invalid_argument);
}

TEST_CASE("hallucination loss matches the element-loop oracle and finite differences") {
    jfr::Rng rng(2);
    Tensor pred = rng.uniform_tensor({2, 3, 5, 4}, -1.0, 1.0);
    Tensor gt = rng.uniform_tensor({2, 3, 5, 4}, -1.0, 1.0);
    auto got = jfr::hallucination_loss(pred, gt);

    double want = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        want += (pred[i] - gt[i]) * (pred[i] - gt[i]);
    }
    CHECK(std::abs(got.loss - want) < 1e-12);

    auto loss = [&] { return jfr::hallucination_loss(pred, gt).loss; };
    Tensor fd = oracle::fd_gradient(loss, pred, 1e-5);
    CHECK(oracle::max_rel_err(got.grad, fd) < 1e-6);
}

TEST_CASE("softmax loss: uniform and saturated cases") {
    // zero features, zero parameters: every class equally likely
    SoftmaxParams p(2, 3);
    Tensor x({4, 3});
    std::vector<std::size_t> labels{0, 1, 0, 1};
    auto uniform = jfr::softmax_loss(x, labels, p);
    CHECK(uniform.loss == doctest::Approx(4.0 * std::numbers::ln2).epsilon(1e-12));
    CHECK(uniform.probs(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

    // +1000 logit margin toward the true class saturates the loss away
    SoftmaxParams q(2, 2);
    q.weights(0, 0) = 2000.0;
    Tensor x2({1, 2}, {1.0, 0.0});
    std::vector<std::size_t> l2{0};
    CHECK(jfr::softmax_loss(x2, l2, q).loss < 1e-6);

    std::vector<std::size_t> bad{2};
    CHECK_THROWS_AS(jfr::softmax_loss(x2, bad, q), std::invalid_argument);
}

TEST_CASE("softmax loss is shift-invariant in the logits") {
    jfr::Rng rng(3);
    SoftmaxParams p(4, 5);
    p.init(rng);
    Tensor x = rng.uniform_tensor({6, 5}, -2.0, 2.0);
    std::vector<std::size_t> labels{0, 1, 2, 3, 1, 2};
    const double base = jfr::softmax_loss(x, labels, p).loss;

    SoftmaxParams shifted = p;
    for (std::size_t j = 0; j < 4; ++j) shifted.bias[j] += 17.25;
    CHECK(jfr::softmax_loss(x, labels, shifted).loss == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("softmax gradients match finite differences") {
    jfr::Rng rng(4);
    SoftmaxParams p(3, 4);
    p.weights = rng.normal_tensor({3, 4}, 0.0, 0.5);
    p.bias = rng.normal_tensor({3}, 0.0, 0.5);
    Tensor x = rng.uniform_tensor({5, 4}, -1.0, 1.0);
    std::vector<std::size_t> labels{0, 2, 1, 1, 0};

    auto got = jfr::softmax_loss(x, labels, p);
    auto loss = [&] { return jfr::softmax_loss(x, labels, p).loss; };
    const double h = 1e-5;
    CHECK(oracle::max_rel_err(got.grad_features, oracle::fd_gradient(loss, x, h)) < 1e-6);
    CHECK(oracle::max_rel_err(got.grad_weights, oracle::fd_gradient(loss, p.weights, h)) <
          1e-6);
    CHECK(oracle::max_rel_err(got.grad_bias, oracle::fd_gradient(loss, p.bias, h)) < 1e-6);
}

TEST_CASE("center loss value and prescribed gradient") {
    CenterBank bank(3, 2, 0.5);
    Tensor x({1, 2}, {1.0, 0.0});
    std::vector<std::size_t> labels{0};
    auto got = jfr::center_loss(x, labels, bank);
    CHECK(got.loss == 1.0);
    CHECK(got.grad_features(0, 0) == 1.0);  // (x - m), not 2(x - m)
    CHECK(got.grad_features(0, 1) == 0.0);

    // x on its center: zero everywhere
    CenterBank b2(2, 3, 0.5);
    jfr::Rng rng(5);
    b2.centers = rng.uniform_tensor({2, 3}, -1.0, 1.0);
    Tensor x2({2, 3});
    std::vector<std::size_t> l2{1, 0};
    for (std::size_t p = 0; p < 3; ++p) {
        x2(0, p) = b2.centers(1, p);
        x2(1, p) = b2.centers(0, p);
    }
    auto zero = jfr::center_loss(x2, l2, b2);
    CHECK(zero.loss == 0.0);
    for (std::size_t i = 0; i < zero.grad_features.size(); ++i) {
        CHECK(zero.grad_features[i] == 0.0);
    }
}

TEST_CASE("center gradient equals half the numeric derivative of the distance sum") {
    jfr::Rng rng(6);
    CenterBank bank(4, 3, 0.5);
    bank.centers = rng.uniform_tensor({4, 3}, -1.0, 1.0);
    Tensor x = rng.uniform_tensor({5, 3}, -1.0, 1.0);
    std::vector<std::size_t> labels{3, 0, 1, 2, 0};

    auto got = jfr::center_loss(x, labels, bank);
    auto loss = [&] { return jfr::center_loss(x, labels, bank).loss; };
    Tensor fd = oracle::fd_gradient(loss, x, 1e-5);
    jfr::scale_inplace(fd, 0.5);
    CHECK(oracle::max_rel_err(got.grad_features, fd) < 1e-6);
}

TEST_CASE("center update rule") {
    jfr::Rng rng(7);
    CenterBank bank(3, 2, 1.0);
    bank.centers = rng.uniform_tensor({3, 2}, -1.0, 1.0);

    // single sample for class 1 with gamma=1: center moves halfway to x
    Tensor x({1, 2}, {4.0, -2.0});
    std::vector<std::size_t> labels{1};
    CenterBank next = jfr::center_update(bank, x, labels);
    for (std::size_t p = 0; p < 2; ++p) {
        CHECK(next.centers(1, p) ==
              doctest::Approx(0.5 * (bank.centers(1, p) + x(0, p))).epsilon(1e-12));
        // absent classes are bit-identical
        CHECK(next.centers(0, p) == bank.centers(0, p));
        CHECK(next.centers(2, p) == bank.centers(2, p));
    }

    // gamma=0 is the identity
    CenterBank frozen(3, 2, 0.0);
    frozen.centers = bank.centers;
    CenterBank same = jfr::center_update(frozen, x, labels);
    for (std::size_t i = 0; i < same.centers.size(); ++i) {
        CHECK(same.centers[i] == bank.centers[i]);
    }
}

TEST_CASE("repeated center updates converge to the class means") {
    jfr::Rng rng(8);
    const std::size_t classes = 3, dim = 4, per_class = 5;
    CenterBank bank(classes, dim, 0.5);
    bank.centers = rng.uniform_tensor({classes, dim}, -2.0, 2.0);

    Tensor x({classes * per_class, dim});
    std::vector<std::size_t> labels(classes * per_class);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = i % classes;
        for (std::size_t p = 0; p < dim; ++p) x(i, p) = rng.next_uniform(-1.0, 1.0);
    }

    // independent class means
    Tensor means({classes, dim});
    std::vector<double> cnt(classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        cnt[labels[i]] += 1.0;
        for (std::size_t p = 0; p < dim; ++p) means(labels[i], p) += x(i, p);
    }
    for (std::size_t j = 0; j < classes; ++j)
        for (std::size_t p = 0; p < dim; ++p) means(j, p) /= cnt[j];

    int iters = 0;
    double worst = 0.0;
    for (; iters < 200; ++iters) {
        bank = jfr::center_update(bank, x, labels);
        worst = 0.0;
        for (std::size_t i = 0; i < means.size(); ++i) {
            worst = std::max(worst, std::abs(bank.centers[i] - means[i]));
        }
        if (worst < 1e-6) break;
    }
    INFO("iterations: " << iters << ", residual: " << worst);
    CHECK(worst < 1e-6);
    CHECK(iters < 200);
}

TEST_CASE("combined loss: term isolation and weighting") {
    jfr::Rng rng(9);
    SoftmaxParams p(3, 4);
    p.init(rng);
    CenterBank bank(3, 4, 0.5);
    bank.centers = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    Tensor pred = rng.uniform_tensor({4, 3, 4, 4}, -1.0, 1.0);
    Tensor gt = rng.uniform_tensor({4, 3, 4, 4}, -1.0, 1.0);
    Tensor x = rng.uniform_tensor({4, 4}, -1.0, 1.0);
    std::vector<std::size_t> labels{0, 1, 2, 1};

    auto all_zero = jfr::combined_loss(pred, gt, x, labels, p, bank, {0.0, 0.0, 0.0});
    CHECK(all_zero.loss == 0.0);
    for (std::size_t i = 0; i < all_zero.grad_pred.size(); ++i)
        CHECK(all_zero.grad_pred[i] == 0.0);
    for (std::size_t i = 0; i < all_zero.grad_features.size(); ++i)
        CHECK(all_zero.grad_features[i] == 0.0);

    auto h_only = jfr::combined_loss(pred, gt, x, labels, p, bank, {0.7, 0.0, 0.0});
    auto h_ref = jfr::hallucination_loss(pred, gt);
    CHECK(h_only.loss == doctest::Approx(0.7 * h_ref.loss).epsilon(1e-12));
    for (std::size_t i = 0; i < h_ref.grad.size(); ++i) {
        CHECK(h_only.grad_pred[i] == doctest::Approx(0.7 * h_ref.grad[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < h_only.grad_features.size(); ++i)
        CHECK(h_only.grad_features[i] == 0.0);

    // weighting is linear: the reference operating point, computed term-wise
    const jfr::LossWeights w{0.01, 1.0, 0.008};
    auto joint = jfr::combined_loss(pred, gt, x, labels, p, bank, w);
    const double lc = jfr::softmax_loss(x, labels, p).loss;
    const double ld = jfr::center_loss(x, labels, bank).loss;
    CHECK(joint.loss ==
          doctest::Approx(0.01 * h_ref.loss + 1.0 * lc + 0.008 * ld).epsilon(1e-12));
    CHECK(joint.loss_h == doctest::Approx(h_ref.loss).epsilon(1e-12));
    CHECK(joint.loss_c == doctest::Approx(lc).epsilon(1e-12));
    CHECK(joint.loss_d == doctest::Approx(ld).epsilon(1e-12));

    auto doubled = jfr::combined_loss(pred, gt, x, labels, p, bank, {0.02, 1.0, 0.008});
    CHECK(doubled.loss - joint.loss == doctest::Approx(0.01 * h_ref.loss).epsilon(1e-9));

    CHECK_THROWS_AS(jfr::combined_loss(pred, gt, x, labels, p, bank, {-1.0, 0.0, 0.0}),
                    std::invalid_argument);
}

TEST_CASE("combined gradients match finite differences of the reference scalar") {
    // The implemented center gradient is (x - m), half the derivative of the
    // squared-distance sum, so the scalar being differenced scales that term
    // by 0.5.
    jfr::Rng rng(10);
    SoftmaxParams p(3, 4);
    p.init(rng);
    CenterBank bank(3, 4, 0.5);
    bank.centers = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    Tensor pred = rng.uniform_tensor({3, 1, 3, 3}, -1.0, 1.0);
    Tensor gt = rng.uniform_tensor({3, 1, 3, 3}, -1.0, 1.0);
    Tensor x = rng.uniform_tensor({3, 4}, -1.0, 1.0);
    std::vector<std::size_t> labels{2, 0, 1};
    const jfr::LossWeights w{0.01, 1.0, 0.008};

    auto got = jfr::combined_loss(pred, gt, x, labels, p, bank, w);
    auto reference = [&] {
        return w.alpha * jfr::hallucination_loss(pred, gt).loss +
               w.beta1 * jfr::softmax_loss(x, labels, p).loss +
               w.beta2 * 0.5 * jfr::center_loss(x, labels, bank).loss;
    };
    const double h = 1e-5;
    CHECK(oracle::max_rel_err(got.grad_pred, oracle::fd_gradient(reference, pred, h)) < 1e-6);
    CHECK(oracle::max_rel_err(got.grad_features, oracle::fd_gradient(reference, x, h)) < 1e-6);
    CHECK(oracle::max_rel_err(got.grad_weights, oracle::fd_gradient(reference, p.weights, h)) <
          1e-6);
    CHECK(oracle::max_rel_err(got.grad_bias, oracle::fd_gradient(reference, p.bias, h)) < 1e-6);
}
