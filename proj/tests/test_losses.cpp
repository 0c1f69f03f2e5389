#include <doctest.h>

#include <cmath>
#include <vector>

#include "yowo/losses.hpp"
#include "yowo/rng.hpp"

using namespace yowo;
using TD = Tensor<double>;

namespace {

double smooth_l1_value(double x, double y) {
    NoGradScope ng;
    return smooth_l1_loss(TD::scalar(x), TD::scalar(y), TD::scalar(1.0)).value();
}

double mse_value(double x, double y) {
    NoGradScope ng;
    return mse_loss(TD::scalar(x), TD::scalar(y), TD::scalar(1.0)).value();
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("smooth l1 unit vectors") {
    CHECK(smooth_l1_value(0.7, 0.7) == 0.0);
    CHECK(std::fabs(smooth_l1_value(1.0, 0.5) - 0.125) < 1e-9);   // |r| = 0.5 -> 0.5*0.25
    CHECK(std::fabs(smooth_l1_value(3.0, 1.0) - 1.5) < 1e-9);     // |r| = 2 -> 2 - 0.5
    CHECK(std::fabs(smooth_l1_value(-1.0, 1.0) - 1.5) < 1e-9);    // symmetric
}

TEST_CASE("smooth l1 derivative is continuous at |r| = 1") {
    NoGradScope off;  // values only; derivative probed by secants
    auto d = [&](double r) {
        double e = 1e-7;
        return (smooth_l1_value(r + e, 0.0) - smooth_l1_value(r - e, 0.0)) / (2 * e);
    };
    CHECK(d(1.0 - 1e-5) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(d(1.0 + 1e-5) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(d(-1.0 - 1e-5) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(d(-1.0 + 1e-5) == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("smooth l1 bounded by half-mse and linear growth") {
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        double r = rng.uniform(-8.0, 8.0);
        double sl1 = smooth_l1_value(r, 0.0);
        CHECK(sl1 <= 0.5 * r * r + 1e-12);
        if (std::fabs(r) > 2.0) CHECK(sl1 == doctest::Approx(std::fabs(r) - 0.5));
    }
}

TEST_CASE("mse unit vectors and gradient") {
    CHECK(mse_value(0.4, 0.4) == 0.0);
    CHECK(std::fabs(mse_value(0.2, 0.7) - 0.25) < 1e-9);

    // gradient 2(x-y) against finite differences
    TD x = TD::scalar(0.3, true);
    auto loss = mse_loss(x, TD::scalar(0.9), TD::scalar(1.0));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0 * (0.3 - 0.9)).epsilon(1e-9));
    double err = grad_check(
        [](const TD& v) { return mse_loss(v, TD::scalar(0.9), TD::scalar(1.0)); }, TD::scalar(0.3),
        1e-5);
    CHECK(err < 1e-8);
}

TEST_CASE("focal loss unit vectors") {
    // perfect prediction
    CHECK(std::fabs(focal_loss_value(1.0, 1, 2.0, 1.0)) < 1e-9);
    // gamma = 0 reduces to cross entropy: ln 2
    CHECK(std::fabs(focal_loss_value(0.5, 1, 0.0, 1.0) - std::log(2.0)) < 1e-9);
    // gamma = 2, x = 0.9, y = 1: -(0.1)^2 ln(0.9)
    double expect = -0.01 * std::log(0.9);
    CHECK(std::fabs(expect - 1.0536051565782628e-3) < 1e-12);
    CHECK(std::fabs(focal_loss_value(0.9, 1, 2.0, 1.0) - expect) < 1e-9);
    // alpha scales linearly
    CHECK(std::fabs(focal_loss_value(0.9, 1, 2.0, 0.25) - 0.25 * expect) < 1e-9);
}

TEST_CASE("focal loss equals binary cross-entropy at gamma 0") {
    Rng rng(2);
    for (int t = 0; t < 100; ++t) {
        double x = rng.uniform(0.01, 0.99);
        int y = rng.bernoulli(0.5) ? 1 : 0;
        double bce = y ? -std::log(x) : -std::log(1.0 - x);
        CHECK(std::fabs(focal_loss_value(x, y, 0.0, 1.0) - bce) < 1e-9);
    }
}

TEST_CASE("focal loss non-increasing in gamma") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        double x = rng.uniform(0.05, 0.95);
        double prev = focal_loss_value(x, 1, 0.0, 1.0);
        for (double g : {0.5, 1.0, 2.0, 4.0}) {
            double cur = focal_loss_value(x, 1, g, 1.0);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("focal loss gradient vs finite differences") {
    Rng rng(4);
    for (double gamma : {0.0, 1.0, 2.0}) {
        std::vector<double> xs(6), ys(6), ws(6);
        for (int i = 0; i < 6; ++i) {
            xs[i] = rng.uniform(0.1, 0.9);
            ys[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
            ws[i] = rng.uniform(0.2, 1.0);
        }
        TD t({6}, ys), w({6}, ws);
        double err = grad_check(
            [&](const TD& v) { return focal_loss(v, t, w, gamma); }, TD({6}, xs), 1e-5);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("balance weights") {
    auto uniform = balance_weights({25, 25, 25, 25});
    for (double w : uniform) CHECK(w == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));

    auto skew = balance_weights({90, 10});
    CHECK(skew[0] == doctest::Approx(std::exp(-0.9)).epsilon(1e-12));
    CHECK(skew[1] == doctest::Approx(std::exp(-0.1)).epsilon(1e-12));
    CHECK(skew[0] == doctest::Approx(0.40656965974).epsilon(1e-9));
    CHECK(skew[1] == doctest::Approx(0.90483741803).epsilon(1e-9));
    CHECK(skew[1] > skew[0]);  // rarer class weighs more

    auto doubled = balance_weights({180, 20});
    CHECK(doubled[0] == doctest::Approx(skew[0]).epsilon(1e-12));
    CHECK(doubled[1] == doctest::Approx(skew[1]).epsilon(1e-12));

    CHECK_THROWS_AS(balance_weights({0, 0}), std::invalid_argument);
}

TEST_CASE("classification loss single-label") {
    std::vector<double> w(3, 1.0);

    // perfect one-hot prediction -> 0 (huge logit margin)
    TD logits({1, 3}, {30.0, -30.0, -30.0});
    auto l = classification_loss(logits, {{0}}, ClassMode::single_label, 0, 2.0, w);
    CHECK(std::fabs(l.value()) < 1e-9);

    // two classes, equal logits, gamma 0 -> ln 2
    std::vector<double> w2(2, 1.0);
    TD eq({1, 2}, {0.4, 0.4});
    auto l2 = classification_loss(eq, {{0}}, ClassMode::single_label, 0, 0.0, w2);
    CHECK(std::fabs(l2.value() - std::log(2.0)) < 1e-9);

    CHECK_THROWS_AS(
        classification_loss(eq, {{0, 1}}, ClassMode::single_label, 0, 0.0, w2),
        std::invalid_argument);
}

TEST_CASE("classification loss multi-label") {
    std::vector<double> w(4, 1.0);
    // pose group {0,1}, interactions {2,3}
    TD logits({1, 4}, {25.0, -25.0, 25.0, -25.0});
    auto l = classification_loss(logits, {{0, 2}}, ClassMode::multi_label, 2, 2.0, w);
    CHECK(std::fabs(l.value()) < 1e-7);  // perfect pose + perfect interactions

    // empty interaction set: only the pose group exists
    std::vector<double> wp(2, 1.0);
    TD pose_only({1, 2}, {0.0, 0.0});
    auto lp = classification_loss(pose_only, {{1}}, ClassMode::multi_label, 2, 0.0, wp);
    CHECK(std::fabs(lp.value() - std::log(2.0)) < 1e-9);

    // pose target must be exactly one-hot
    CHECK_THROWS_AS(classification_loss(logits, {{0, 1}}, ClassMode::multi_label, 2, 2.0, w),
                    std::invalid_argument);
    CHECK_THROWS_AS(classification_loss(logits, {{2}}, ClassMode::multi_label, 2, 2.0, w),
                    std::invalid_argument);
}

TEST_CASE("classification loss gradient") {
    Rng rng(5);
    std::vector<double> w{1.0, 0.7, 1.3};
    std::vector<double> init(2 * 3);
    for (auto& v : init) v = rng.uniform(-1.0, 1.0);
    double err = grad_check(
        [&](const TD& v) {
            return classification_loss(v, {{2}, {0}}, ClassMode::single_label, 0, 2.0, w);
        },
        TD({2, 3}, init), 1e-5);
    CHECK(err < 1e-6);

    std::vector<double> w4{1.0, 0.7, 1.3, 0.5};
    std::vector<double> init4(2 * 4);
    for (auto& v : init4) v = rng.uniform(-1.0, 1.0);
    double err4 = grad_check(
        [&](const TD& v) {
            return classification_loss(v, {{1, 3}, {0, 2, 3}}, ClassMode::multi_label, 2, 2.0, w4);
        },
        TD({2, 4}, init4), 1e-5);
    CHECK(err4 < 1e-6);
}

TEST_CASE("total loss composition") {
    NoGradScope ng;
    CHECK(total_loss(TD::scalar(2.0), TD::scalar(1.0), 0.5).value() == doctest::Approx(2.0));
    CHECK(total_loss(TD::scalar(0.0), TD::scalar(0.0), 0.5).value() == 0.0);
    CHECK(total_loss(TD::scalar(7.0), TD::scalar(1.5), 0.0).value() == doctest::Approx(1.5));
}

TEST_CASE("detection loss report invariants and gradient flow") {
    Rng rng(6);
    HeadConfig head{3, 2, ClassMode::single_label, 0};
    AnchorSet anchors;
    anchors.sizes = {{1.0, 1.0}, {2.5, 2.0}};
    std::size_t g = 4, n = 2;

    std::vector<TargetMaps> tms;
    tms.push_back(build_targets({{Box::from_center(0.4, 0.4, 0.3, 0.25), {1}}}, anchors, head, g, g));
    tms.push_back(build_targets({{Box::from_center(0.7, 0.6, 0.2, 0.2), {2}}}, anchors, head, g, g));

    std::vector<double> rv(n * head.out_channels() * g * g);
    for (auto& v : rv) v = rng.uniform(-0.5, 0.5);
    TD raw({n, head.out_channels(), g, g}, rv, true);

    LossConfig cfg;
    std::vector<double> cw(head.num_classes, 1.0);
    LossReport rep;
    auto loss = detection_loss(raw, tms, anchors, head, cfg, cw, rep);

    CHECK(rep.l_d == doctest::Approx(rep.l_x + rep.l_y + rep.l_w + rep.l_h + rep.l_conf).epsilon(1e-12));
    CHECK(rep.l_final == doctest::Approx(cfg.lambda * rep.l_d + rep.l_cls).epsilon(1e-12));
    CHECK(rep.l_x >= 0.0);
    CHECK(rep.l_conf >= 0.0);
    CHECK(rep.l_cls >= 0.0);

    backward(loss);
    bool any_nonzero = false;
    for (double gv : raw.grad()) any_nonzero = any_nonzero || gv != 0.0;
    CHECK(any_nonzero);

    // finite-difference check of the assembled loss w.r.t. the raw grid.
    // conf targets are held fixed (ConfTarget::one) so the loss is smooth.
    LossConfig fixed = cfg;
    fixed.conf_target = ConfTarget::one;
    LossReport tmp;
    double err = grad_check(
        [&](const TD& v) { return detection_loss(v, tms, anchors, head, fixed, cw, tmp); },
        TD({n, head.out_channels(), g, g}, rv), 1e-5);
    CHECK(err < 1e-5);

    // empty frames: coordinate and class terms vanish, conf term remains
    std::vector<TargetMaps> empty_tms;
    empty_tms.push_back(build_targets({}, anchors, head, g, g));
    empty_tms.push_back(build_targets({}, anchors, head, g, g));
    LossReport rep0;
    clear_record<double>();
    auto l0 = detection_loss(raw, empty_tms, anchors, head, cfg, cw, rep0);
    CHECK(rep0.l_x == 0.0);
    CHECK(rep0.l_cls == 0.0);
    CHECK(rep0.l_conf > 0.0);
    clear_record<double>();
    (void)l0;
}

TEST_SUITE_END();
