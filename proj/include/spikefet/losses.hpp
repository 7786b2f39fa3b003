#pragma once

#include "spikefet/autograd.hpp"
#include "spikefet/head.hpp"

namespace spikefet {

struct LossWeights {
    double lambda_iou = 2.0;
    double lambda_l1 = 5.0;
    double alpha = 1.0;  // response-similarity weight
    double beta = 0.5;   // STR weight
    double tau = 2.0;    // response temperature
    double focal_a = 2.0;
    double focal_b = 4.0;
};

struct GroundTruthMaps {
    Tensor heat;  // [1,1,H,W], gaussian splat, exactly 1 at the peak cell
    int peak_row = 0;
    int peak_col = 0;
    Tensor box;  // [4] (cx,cy,w,h) normalized to the search region
};

// box = (cx,cy,w,h) in [0,1] search coordinates.
GroundTruthMaps make_gt_maps(const Tensor& box, int hs, int ws);

// Differentiable box readout at the ground-truth cell.
Var pred_box_at(const HeadOutput& head, int row, int col);

struct LossBreakdown {
    double total = 0;
    double cls_f = 0, iou_f = 0, l1_f = 0;
    double cls_e = 0, iou_e = 0, l1_e = 0;
    double res = 0, sim = 0;
};

// L_track = sum over modalities of (cls + lambda_iou*iou + lambda_l1*l1)
// + alpha * L_res + beta * L_sim. STR features may be omitted (use_str =
// false), in which case the breakdown reports sim = 0.
Var total_loss(const HeadOutput& hf, const HeadOutput& he, const GroundTruthMaps& gt,
               const Var& z1_f, const Var& z2_f, const Var& z1_e, const Var& z2_e,
               const LossWeights& w, bool use_str, LossBreakdown* bd);

}  // namespace spikefet
