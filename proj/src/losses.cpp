#include "spikefet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spikefet {

GroundTruthMaps make_gt_maps(const Tensor& box, int hs, int ws) {
    if (box.numel() != 4) throw std::invalid_argument("make_gt_maps: box must be (cx,cy,w,h)");
    const double cx = box[0], cy = box[1], bw = box[2], bh = box[3];
    if (bw <= 0.0 || bh <= 0.0) throw std::invalid_argument("make_gt_maps: empty box");

    GroundTruthMaps gt;
    gt.box = box;
    gt.peak_col = std::min(std::max(static_cast<int>(std::floor(cx * ws)), 0), ws - 1);
    gt.peak_row = std::min(std::max(static_cast<int>(std::floor(cy * hs)), 0), hs - 1);
    const double sx = std::max(1.0, bw * ws / 6.0);
    const double sy = std::max(1.0, bh * hs / 6.0);
    gt.heat = Tensor({1, 1, hs, ws});
    for (int y = 0; y < hs; ++y) {
        for (int x = 0; x < ws; ++x) {
            const double dy = y - gt.peak_row, dx = x - gt.peak_col;
            gt.heat.at4(0, 0, y, x) =
                std::exp(-(dx * dx / (2.0 * sx * sx) + dy * dy / (2.0 * sy * sy)));
        }
    }
    return gt;
}

Var pred_box_at(const HeadOutput& head, int row, int col) {
    const int H = head.offset.value().dim(2), W = head.offset.value().dim(3);
    Var off = gather_cell(head.offset, row, col);  // (off_x, off_y)
    Var sz = gather_cell(head.size, row, col);     // (w, h)
    Tensor s({2}, {1.0 / W, 1.0 / H});
    Tensor t({2}, {static_cast<double>(col) / W, static_cast<double>(row) / H});
    return concat_vec({affine_elem(off, s, t), sz});
}

Var total_loss(const HeadOutput& hf, const HeadOutput& he, const GroundTruthMaps& gt,
               const Var& z1_f, const Var& z2_f, const Var& z1_e, const Var& z2_e,
               const LossWeights& w, bool use_str, LossBreakdown* bd) {
    Var cls_f = gwf_focal(hf.response, gt.heat, w.focal_a, w.focal_b);
    Var cls_e = gwf_focal(he.response, gt.heat, w.focal_a, w.focal_b);
    Var box_f = pred_box_at(hf, gt.peak_row, gt.peak_col);
    Var box_e = pred_box_at(he, gt.peak_row, gt.peak_col);
    Var iou_f = giou_loss(box_f, gt.box);
    Var iou_e = giou_loss(box_e, gt.box);
    Var l1_f = l1_loss(box_f, gt.box);
    Var l1_e = l1_loss(box_e, gt.box);
    Var res = response_loss(hf.response, he.response, w.tau, w.focal_a, w.focal_b);

    Var total = add(cls_f, scale(iou_f, w.lambda_iou));
    total = add(total, scale(l1_f, w.lambda_l1));
    total = add(total, cls_e);
    total = add(total, scale(iou_e, w.lambda_iou));
    total = add(total, scale(l1_e, w.lambda_l1));
    total = add(total, scale(res, w.alpha));

    double sim_value = 0.0;
    if (use_str && w.beta != 0.0) {
        Var sim = scale(add(str_loss(z1_f, z2_f), str_loss(z1_e, z2_e)), 0.5);
        sim_value = sim.value()[0];
        total = add(total, scale(sim, w.beta));
    }

    if (bd) {
        bd->cls_f = cls_f.value()[0];
        bd->iou_f = iou_f.value()[0];
        bd->l1_f = l1_f.value()[0];
        bd->cls_e = cls_e.value()[0];
        bd->iou_e = iou_e.value()[0];
        bd->l1_e = l1_e.value()[0];
        bd->res = res.value()[0];
        bd->sim = sim_value;
        bd->total = total.value()[0];
    }
    return total;
}

}  // namespace spikefet
