#pragma once

#include <string>
#include <vector>

#include "spikefet/autograd.hpp"
#include "spikefet/rng.hpp"
#include "spikefet/tensor.hpp"

namespace spikefet {

struct Rect {
    std::string name;
    int x = 0;  // column of the left edge
    int y = 0;  // row of the top edge
    int w = 0;
    int h = 0;
};

// Where the search region sits relative to the template pair. right/left make
// a horizontal canvas with the two templates stacked vertically in a column;
// bottom/top make a vertical canvas with the templates side by side in a row.
enum class PatchArrangement { search_right, search_left, search_bottom, search_top };

struct PatchLayout {
    PatchArrangement arrangement = PatchArrangement::search_right;
    int canvas_h = 0;
    int canvas_w = 0;
    Rect z1, z2, x;
};

// Template patches are hz x wz, the search patch hx x wx. Horizontal layouts
// require hx == 2*hz, vertical ones wx == 2*wz.
PatchLayout plan_patchwork(PatchArrangement a, int hz, int wz, int hx, int wx);

PatchArrangement random_arrangement(Rng& rng);
const char* arrangement_name(PatchArrangement a);

// Assembles one modality's canvas [1,C,H,W] from the three patches.
Tensor assemble_canvas(const PatchLayout& l, const Tensor& z1, const Tensor& z2, const Tensor& x);

// Region id per feature-grid cell (canvas downsampled by `stride`):
// 0 = z1, 1 = z2, 2 = search. Canvas extents must be divisible by stride.
std::vector<int> type_map(const PatchLayout& l, int stride);

struct SplitFeatures {
    Var z1, z2, x;
};

// Crops the per-region feature maps back out of a fused canvas feature map.
SplitFeatures split_features(const Var& fused, const PatchLayout& l, int stride);

}  // namespace spikefet
