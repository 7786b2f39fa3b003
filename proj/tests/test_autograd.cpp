#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "grad_suite.hpp"
#include "spikefet/autograd.hpp"
#include "spikefet/gradcheck.hpp"

using namespace spikefet;
using spikefet::testing::rand_uniform;

namespace {

// Independent dense convolution: per output element, iterate taps with
// explicit bounds tests. Deliberately structured differently from the
// library loops.
Tensor conv_reference(const Tensor& x, const Tensor& w, const Tensor* bias, const ConvSpec& s) {
    const int T = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Ho = s.out_extent(H), Wo = s.out_extent(W);
    Tensor y({T, s.out_channels, Ho, Wo});
    for (int t = 0; t < T; ++t)
        for (int co = 0; co < s.out_channels; ++co)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    double acc = bias ? (*bias)[co] : 0.0;
                    for (int ci = 0; ci < Ci; ++ci) {
                        if (s.kind == ConvSpec::Kind::depthwise && ci != co) continue;
                        for (int ky = 0; ky < s.kernel; ++ky)
                            for (int kx = 0; kx < s.kernel; ++kx) {
                                const int iy = oy * s.stride + ky - s.padding;
                                const int ix = ox * s.stride + kx - s.padding;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                const double wv =
                                    s.kind == ConvSpec::Kind::depthwise
                                        ? w.at4(co, 0, ky, kx)
                                        : w.at4(co, ci, ky, kx);
                                acc += x.at4(t, ci, iy, ix) * wv;
                            }
                    }
                    y.at4(t, co, oy, ox) = acc;
                }
    return y;
}

}  // namespace

TEST_CASE("conv2d forward matches an independent reference") {
    struct Case {
        ConvSpec spec;
        int h, w;
        bool bias;
    };
    const Case cases[] = {
        {{ConvSpec::Kind::standard, 3, 5, 3, 1, 1}, 7, 9, true},
        {{ConvSpec::Kind::standard, 2, 4, 5, 2, 2}, 9, 8, false},
        {{ConvSpec::Kind::standard, 4, 4, 4, 4, 0}, 8, 8, true},
        {{ConvSpec::Kind::pointwise, 6, 3, 1, 1, 0}, 5, 6, false},
        {{ConvSpec::Kind::depthwise, 5, 5, 7, 1, 3}, 10, 11, false},
        {{ConvSpec::Kind::depthwise, 3, 3, 3, 2, 1}, 7, 7, true},
    };
    uint64_t seed = 42;
    for (const Case& c : cases) {
        CAPTURE(c.spec.kernel);
        Rng rng(seed++);
        Tensor x = rand_uniform({2, c.spec.in_channels, c.h, c.w}, rng, -1.5, 1.5);
        Tensor w = rand_uniform(c.spec.weight_shape(), rng, -1, 1);
        Tensor b = rand_uniform({c.spec.out_channels}, rng, -0.5, 0.5);
        Var y = conv2d(Var::leaf(x), Var::leaf(w),
                       c.bias ? Var::leaf(b) : Var(), c.spec);
        Tensor ref = conv_reference(x, w, c.bias ? &b : nullptr, c.spec);
        REQUIRE(y.value().same_shape(ref));
        for (int i = 0; i < ref.numel(); ++i)
            CHECK(y.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d rejects invalid specs") {
    ConvSpec bad{ConvSpec::Kind::depthwise, 3, 4, 3, 1, 1};
    CHECK_THROWS(bad.validate());
    ConvSpec bad2{ConvSpec::Kind::pointwise, 3, 3, 3, 1, 0};
    CHECK_THROWS(bad2.validate());
}

TEST_CASE("backward accumulates fan-out and is repeatable") {
    Var x = Var::leaf(Tensor({3}, {1.0, -2.0, 0.5}), true, "x");
    Var y = sum(add(x, x));  // dy/dx = 2 everywhere
    backward(y);
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0));
    backward(y);  // grads cleared, not doubled
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0));
}

TEST_CASE("backward requires a scalar") {
    Var x = Var::leaf(Tensor({3}, {1, 2, 3}), true);
    CHECK_THROWS(backward(add(x, x)));
}

TEST_CASE("leaves without requires_grad receive no gradient") {
    Var a = Var::leaf(Tensor({2}, {1, 2}), true);
    Var b = Var::leaf(Tensor({2}, {3, 4}), false);
    backward(sum(add(a, b)));
    CHECK(a.grad().numel() == 2);
    CHECK(b.grad().numel() == 0);  // never allocated
}

TEST_CASE("gradient suite: every op within 1e-4 of central differences") {
    auto entries = spikefet::testing::run_grad_suite();
    CHECK(entries.size() >= 60);  // >= 5 instances per op family
    for (const auto& e : entries) {
        CAPTURE(e.name);
        CAPTURE(e.res.worst);
        CHECK(e.res.checked > 0);
        CHECK(e.res.max_rel_err <= 1e-4);
    }
}

TEST_CASE("hard spikes carry the surrogate window gradient") {
    // Surrogate: d SN/dx = 1 inside (0, D), 0 outside, regardless of rounding.
    SpikeNeuronConfig cfg;
    Tensor vals({6}, {-1.0, 0.4, 1.6, 2.5, 3.9, 5.2});
    Var x = Var::leaf(vals, true);
    Var y = sum(spike(x, cfg, SpikeMode::hard));
    backward(y);
    const double want[6] = {0, 1, 1, 1, 1, 0};
    for (int i = 0; i < 6; ++i) CHECK(x.grad()[i] == doctest::Approx(want[i]));
}

TEST_CASE("batch norm normalizes batch statistics in training mode") {
    Rng rng(7);
    Var x = Var::leaf(rand_uniform({2, 3, 4, 4}, rng, -3, 3), true);
    Var g = Var::leaf(Tensor({3}, {1, 1, 1}));
    Var b = Var::leaf(Tensor({3}, {0, 0, 0}));
    BNState st;
    Var y = batch_norm(x, g, b, st, true);
    // Per-channel mean ~0, variance ~1.
    const int M = 2 * 4 * 4;
    for (int c = 0; c < 3; ++c) {
        double m = 0, v = 0;
        for (int t = 0; t < 2; ++t)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) m += y.value().at4(t, c, i, j);
        m /= M;
        for (int t = 0; t < 2; ++t)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    double d = y.value().at4(t, c, i, j) - m;
                    v += d * d;
                }
        v /= M;
        CHECK(m == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
    }
    CHECK(st.initialized);
}

TEST_CASE("batch norm eval mode uses running statistics") {
    Rng rng(8);
    Tensor xv = rand_uniform({4, 2, 3, 3}, rng, -2, 2);
    Var g = Var::leaf(Tensor({2}, {1.5, 0.5}));
    Var b = Var::leaf(Tensor({2}, {0.25, -0.25}));
    BNState st;
    (void)batch_norm(Var::leaf(xv), g, b, st, true);
    // A fresh input normalized by the stored stats, not its own.
    Tensor probe = Tensor::full({1, 2, 1, 1}, 0.0);
    Var y = batch_norm(Var::leaf(probe), g, b, st, false);
    for (int c = 0; c < 2; ++c) {
        double want = (0.0 - st.running_mean[c]) / std::sqrt(st.running_var[c] + 1e-5);
        want = want * g.value()[c] + b.value()[c];
        CHECK(y.value().at4(0, c, 0, 0) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("stripe attention leaves uncovered tokens at zero") {
    SpikeNeuronConfig cfg;
    StripePlan plan;
    plan.heads = 2;
    plan.horizontal = {{0, 1}};  // token 2 uncovered
    plan.vertical = {{0, 1}};
    Rng rng(9);
    Var q = Var::leaf(rand_uniform({3, 2}, rng, 0.1, 1.0));
    Var k = Var::leaf(rand_uniform({3, 2}, rng, 0.1, 1.0));
    Var v = Var::leaf(rand_uniform({3, 4}, rng, 0.1, 1.0));
    Var y = stripe_ssa(q, k, v, plan, 0.25, cfg, SpikeMode::smooth);
    for (int c = 0; c < 4; ++c) CHECK(y.value().at2(2, c) == 0.0);
}
