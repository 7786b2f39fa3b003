#include "spikefet/patchwork.hpp"

#include <stdexcept>

namespace spikefet {

PatchLayout plan_patchwork(PatchArrangement a, int hz, int wz, int hx, int wx) {
    if (hz <= 0 || wz <= 0 || hx <= 0 || wx <= 0)
        throw std::invalid_argument("plan_patchwork: patch extents must be positive");
    PatchLayout l;
    l.arrangement = a;
    const bool horizontal = a == PatchArrangement::search_right || a == PatchArrangement::search_left;
    if (horizontal) {
        if (hx != 2 * hz)
            throw std::invalid_argument(
                "plan_patchwork: horizontal canvas needs search height == 2x template height");
        l.canvas_h = hx;
        l.canvas_w = wz + wx;
        const int tpl_x = a == PatchArrangement::search_right ? 0 : wx;
        const int srch_x = a == PatchArrangement::search_right ? wz : 0;
        l.z1 = {"z1", tpl_x, 0, wz, hz};
        l.z2 = {"z2", tpl_x, hz, wz, hz};
        l.x = {"x", srch_x, 0, wx, hx};
    } else {
        if (wx != 2 * wz)
            throw std::invalid_argument(
                "plan_patchwork: vertical canvas needs search width == 2x template width");
        l.canvas_h = hz + hx;
        l.canvas_w = wx;
        const int tpl_y = a == PatchArrangement::search_bottom ? 0 : hx;
        const int srch_y = a == PatchArrangement::search_bottom ? hz : 0;
        l.z1 = {"z1", 0, tpl_y, wz, hz};
        l.z2 = {"z2", wz, tpl_y, wz, hz};
        l.x = {"x", 0, srch_y, wx, hx};
    }
    return l;
}

PatchArrangement random_arrangement(Rng& rng) {
    switch (rng.below(4)) {
        case 0: return PatchArrangement::search_right;
        case 1: return PatchArrangement::search_left;
        case 2: return PatchArrangement::search_bottom;
        default: return PatchArrangement::search_top;
    }
}

const char* arrangement_name(PatchArrangement a) {
    switch (a) {
        case PatchArrangement::search_right: return "search_right";
        case PatchArrangement::search_left: return "search_left";
        case PatchArrangement::search_bottom: return "search_bottom";
        default: return "search_top";
    }
}

namespace {

void paste(Tensor& canvas, const Tensor& patch, const Rect& r) {
    if (patch.ndim() != 4 || patch.dim(0) != 1)
        throw std::invalid_argument("assemble_canvas: patches must be [1,C,H,W]");
    if (patch.dim(2) != r.h || patch.dim(3) != r.w)
        throw std::invalid_argument("assemble_canvas: patch '" + r.name + "' is " +
                                    patch.shape_str() + ", layout expects " + std::to_string(r.h) +
                                    "x" + std::to_string(r.w));
    if (patch.dim(1) != canvas.dim(1))
        throw std::invalid_argument("assemble_canvas: channel mismatch for '" + r.name + "'");
    for (int c = 0; c < patch.dim(1); ++c)
        for (int y = 0; y < r.h; ++y)
            for (int x = 0; x < r.w; ++x)
                canvas.at4(0, c, r.y + y, r.x + x) = patch.at4(0, c, y, x);
}

}  // namespace

Tensor assemble_canvas(const PatchLayout& l, const Tensor& z1, const Tensor& z2, const Tensor& x) {
    if (z1.ndim() != 4 || z1.dim(1) != z2.dim(1) || z1.dim(1) != x.dim(1))
        throw std::invalid_argument("assemble_canvas: channel counts differ across patches");
    Tensor canvas({1, z1.dim(1), l.canvas_h, l.canvas_w});
    paste(canvas, z1, l.z1);
    paste(canvas, z2, l.z2);
    paste(canvas, x, l.x);
    return canvas;
}

std::vector<int> type_map(const PatchLayout& l, int stride) {
    if (stride <= 0 || l.canvas_h % stride != 0 || l.canvas_w % stride != 0)
        throw std::invalid_argument("type_map: canvas not divisible by stride");
    const int gh = l.canvas_h / stride, gw = l.canvas_w / stride;
    std::vector<int> m(static_cast<size_t>(gh) * gw, -1);
    auto mark = [&](const Rect& r, int id) {
        if (r.x % stride || r.y % stride || r.w % stride || r.h % stride)
            throw std::invalid_argument("type_map: region '" + r.name +
                                        "' not aligned to the feature stride");
        for (int y = r.y / stride; y < (r.y + r.h) / stride; ++y)
            for (int x = r.x / stride; x < (r.x + r.w) / stride; ++x)
                m[static_cast<size_t>(y) * gw + x] = id;
    };
    mark(l.z1, 0);
    mark(l.z2, 1);
    mark(l.x, 2);
    for (int v : m)
        if (v < 0) throw std::logic_error("type_map: layout leaves uncovered cells");
    return m;
}

SplitFeatures split_features(const Var& fused, const PatchLayout& l, int stride) {
    const Tensor& v = fused.value();
    if (v.ndim() != 4 || v.dim(2) * stride != l.canvas_h || v.dim(3) * stride != l.canvas_w)
        throw std::invalid_argument("split_features: feature map " + v.shape_str() +
                                    " does not match canvas " + std::to_string(l.canvas_h) + "x" +
                                    std::to_string(l.canvas_w) + " at stride " +
                                    std::to_string(stride));
    SplitFeatures out;
    out.z1 = crop_hw(fused, l.z1.y / stride, l.z1.x / stride, l.z1.h / stride, l.z1.w / stride);
    out.z2 = crop_hw(fused, l.z2.y / stride, l.z2.x / stride, l.z2.h / stride, l.z2.w / stride);
    out.x = crop_hw(fused, l.x.y / stride, l.x.x / stride, l.x.h / stride, l.x.w / stride);
    return out;
}

}  // namespace spikefet
