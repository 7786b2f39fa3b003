#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>

#include "doctest.h"
#include "spikefet/patchwork.hpp"
#include "spikefet/rng.hpp"

using namespace spikefet;

namespace {

constexpr std::array<PatchArrangement, 4> kAll = {
    PatchArrangement::search_right, PatchArrangement::search_left,
    PatchArrangement::search_bottom, PatchArrangement::search_top};

Tensor numbered(const std::vector<int>& shape, double base) {
    Tensor t(shape);
    for (int i = 0; i < t.numel(); ++i) t[i] = base + i;
    return t;
}

bool overlaps(const Rect& a, const Rect& b) {
    return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

}  // namespace

TEST_CASE("every layout tiles the canvas exactly") {
    const int hz = 8, wz = 8, hx = 16, wx = 16;
    for (PatchArrangement a : kAll) {
        CAPTURE(arrangement_name(a));
        PatchLayout l = plan_patchwork(a, hz, wz, hx, wx);
        // Area accounting: two templates + search cover the canvas exactly.
        CHECK(l.canvas_h * l.canvas_w == 2 * hz * wz + hx * wx);
        // No overlap.
        CHECK(!overlaps(l.z1, l.z2));
        CHECK(!overlaps(l.z1, l.x));
        CHECK(!overlaps(l.z2, l.x));
        // Inside the canvas.
        for (const Rect* r : {&l.z1, &l.z2, &l.x}) {
            CHECK(r->x >= 0);
            CHECK(r->y >= 0);
            CHECK(r->x + r->w <= l.canvas_w);
            CHECK(r->y + r->h <= l.canvas_h);
        }
        // z1 precedes z2 along the stacking axis.
        const bool horizontal =
            a == PatchArrangement::search_right || a == PatchArrangement::search_left;
        if (horizontal)
            CHECK(l.z1.y < l.z2.y);
        else
            CHECK(l.z1.x < l.z2.x);
    }
}

TEST_CASE("mismatched patch shapes are rejected") {
    CHECK_THROWS(plan_patchwork(PatchArrangement::search_right, 8, 8, 15, 16));
    CHECK_THROWS(plan_patchwork(PatchArrangement::search_top, 8, 8, 16, 15));
}

TEST_CASE("assemble places each patch at its rectangle") {
    const int hz = 2, wz = 2, hx = 4, wx = 4, C = 3;
    for (PatchArrangement a : kAll) {
        CAPTURE(arrangement_name(a));
        PatchLayout l = plan_patchwork(a, hz, wz, hx, wx);
        Tensor z1 = numbered({1, C, hz, wz}, 100);
        Tensor z2 = numbered({1, C, hz, wz}, 200);
        Tensor x = numbered({1, C, hx, wx}, 300);
        Tensor canvas = assemble_canvas(l, z1, z2, x);
        REQUIRE(canvas.shape() == std::vector<int>({1, C, l.canvas_h, l.canvas_w}));
        auto check_patch = [&](const Rect& r, const Tensor& src) {
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < r.h; ++y)
                    for (int xx = 0; xx < r.w; ++xx)
                        REQUIRE(canvas.at4(0, c, r.y + y, r.x + xx) == src.at4(0, c, y, xx));
        };
        check_patch(l.z1, z1);
        check_patch(l.z2, z2);
        check_patch(l.x, x);
        // Exact tiling means the canvas sum equals the patch sums.
        CHECK(canvas.sum() == doctest::Approx(z1.sum() + z2.sum() + x.sum()));
    }
}

TEST_CASE("type map accounts every feature cell to the right region") {
    const int hz = 8, wz = 8, hx = 16, wx = 16, stride = 4;
    for (PatchArrangement a : kAll) {
        CAPTURE(arrangement_name(a));
        PatchLayout l = plan_patchwork(a, hz, wz, hx, wx);
        std::vector<int> ids = type_map(l, stride);
        REQUIRE(static_cast<int>(ids.size()) == (l.canvas_h / stride) * (l.canvas_w / stride));
        int counts[3] = {0, 0, 0};
        for (int id : ids) {
            REQUIRE(id >= 0);
            REQUIRE(id <= 2);
            ++counts[id];
        }
        CHECK(counts[0] == (hz / stride) * (wz / stride));
        CHECK(counts[1] == (hz / stride) * (wz / stride));
        CHECK(counts[2] == (hx / stride) * (wx / stride));
        // Spot-check: the cell at the center of the search rect maps to 2.
        const int gw = l.canvas_w / stride;
        const int cyy = (l.x.y + l.x.h / 2) / stride, cxx = (l.x.x + l.x.w / 2) / stride;
        CHECK(ids[cyy * gw + cxx] == 2);
    }
}

TEST_CASE("split after assemble returns the original patches (identity)") {
    Rng rng(31);
    const int hz = 8, wz = 8, hx = 16, wx = 16, C = 2, stride = 4;
    for (PatchArrangement a : kAll) {
        for (int rep = 0; rep < 3; ++rep) {
            PatchLayout l = plan_patchwork(a, hz, wz, hx, wx);
            // Feature-resolution patches (as if extracted at `stride`).
            Tensor fz1({1, C, hz / stride, wz / stride});
            Tensor fz2({1, C, hz / stride, wz / stride});
            Tensor fx({1, C, hx / stride, wx / stride});
            for (Tensor* t : {&fz1, &fz2, &fx})
                for (int i = 0; i < t->numel(); ++i) (*t)[i] = rng.uniform(-1, 1);

            // Assemble the feature canvas from feature patches using a
            // stride-scaled layout, then split with the real layout.
            PatchLayout lf = plan_patchwork(a, hz / stride, wz / stride, hx / stride,
                                            wx / stride);
            Tensor fcanvas = assemble_canvas(lf, fz1, fz2, fx);
            SplitFeatures sp = split_features(Var::leaf(fcanvas), l, stride);
            REQUIRE(sp.z1.value().same_shape(fz1));
            REQUIRE(sp.z2.value().same_shape(fz2));
            REQUIRE(sp.x.value().same_shape(fx));
            for (int i = 0; i < fz1.numel(); ++i) CHECK(sp.z1.value()[i] == fz1[i]);
            for (int i = 0; i < fz2.numel(); ++i) CHECK(sp.z2.value()[i] == fz2[i]);
            for (int i = 0; i < fx.numel(); ++i) CHECK(sp.x.value()[i] == fx[i]);
        }
    }
}

TEST_CASE("cross-modal layout identity: both modalities share one plan") {
    // The layout object carries no modality state; assembling two different
    // modality tensors with the same plan puts patches at identical rects.
    PatchLayout l = plan_patchwork(PatchArrangement::search_left, 4, 4, 8, 8);
    Tensor fz1 = numbered({1, 1, 4, 4}, 0), fz2 = numbered({1, 1, 4, 4}, 50),
           fx = numbered({1, 1, 8, 8}, 100);
    Tensor ez1 = numbered({1, 6, 4, 4}, 0), ez2 = numbered({1, 6, 4, 4}, 50),
           ex = numbered({1, 6, 8, 8}, 100);
    Tensor cf = assemble_canvas(l, fz1, fz2, fx);
    Tensor ce = assemble_canvas(l, ez1, ez2, ex);
    // Same spatial extents, channel counts differ.
    CHECK(cf.dim(2) == ce.dim(2));
    CHECK(cf.dim(3) == ce.dim(3));
    // Channel 0 of the event canvas equals the frame canvas (patches were
    // constructed with identical channel-0 data).
    for (int y = 0; y < cf.dim(2); ++y)
        for (int x = 0; x < cf.dim(3); ++x)
            CHECK(cf.at4(0, 0, y, x) == ce.at4(0, 0, y, x));
}

TEST_CASE("random arrangement is uniform over the four layouts") {
    Rng rng(2024);
    const int n = 40000;
    int counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < n; ++i) counts[static_cast<int>(random_arrangement(rng))]++;
    for (int k = 0; k < 4; ++k) {
        const double frac = static_cast<double>(counts[k]) / n;
        CAPTURE(k);
        CHECK(std::abs(frac - 0.25) <= 0.02);
    }
}

TEST_CASE("shape mismatches surface the patch name") {
    PatchLayout l = plan_patchwork(PatchArrangement::search_right, 4, 4, 8, 8);
    Tensor z1({1, 2, 4, 4}), z2({1, 2, 4, 4}), x({1, 2, 8, 8}), bad({1, 2, 3, 4});
    CHECK_THROWS_WITH_AS(assemble_canvas(l, bad, z2, x), doctest::Contains("z1"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(assemble_canvas(l, z1, z2, bad), doctest::Contains("x"),
                         std::invalid_argument);
    CHECK_THROWS(type_map(l, 3));  // stride must divide the canvas
}
