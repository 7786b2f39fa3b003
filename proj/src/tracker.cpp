#include "spikefet/tracker.hpp"

#include <stdexcept>

namespace spikefet {

void ModelConfig::validate() const {
    plan.validate();
    if (search_size != 2 * template_size)
        throw std::invalid_argument("model: search size must be twice the template size");
    if (event_bins <= 0) throw std::invalid_argument("model: event bins must be positive");
    const int stride = plan.total_stride();
    if (template_size % stride || search_size % stride)
        throw std::invalid_argument("model: patch sizes must be divisible by the total stride");
    fusion.attn.validate(plan.out_channels());
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("model: lambda outside [0,1]");
}

Tracker::Tracker(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg), ps_(seed) {
    cfg_.validate();
}

namespace {

void check_patch(const Tensor& t, int ch, int hw, const char* what) {
    if (t.ndim() != 4 || t.dim(0) != 1 || t.dim(1) != ch || t.dim(2) != hw || t.dim(3) != hw)
        throw std::invalid_argument(std::string("tracker: ") + what + " must be [1," +
                                    std::to_string(ch) + "," + std::to_string(hw) + "," +
                                    std::to_string(hw) + "], got " + t.shape_str());
}

}  // namespace

Tracker::ForwardOut Tracker::forward(FwdCtx& ctx, const SampleInput& s,
                                     const PatchLayout& layout) {
    const int hz = cfg_.template_size, hx = cfg_.search_size;
    check_patch(s.z1_frame, 1, hz, "z1 frame patch");
    check_patch(s.z2_frame, 1, hz, "z2 frame patch");
    check_patch(s.x_frame, 1, hx, "search frame patch");
    check_patch(s.z1_event, cfg_.event_channels(), hz, "z1 event patch");
    check_patch(s.z2_event, cfg_.event_channels(), hz, "z2 event patch");
    check_patch(s.x_event, cfg_.event_channels(), hx, "search event patch");

    Tensor canvas_f = assemble_canvas(layout, s.z1_frame, s.z2_frame, s.x_frame);
    Tensor canvas_e = assemble_canvas(layout, s.z1_event, s.z2_event, s.x_event);

    Var feat_f = extract(ps_, ctx, "frame", cfg_.plan, 1, Var::leaf(std::move(canvas_f)));
    Var feat_e = extract(ps_, ctx, "event", cfg_.plan, cfg_.event_channels(),
                         Var::leaf(std::move(canvas_e)));

    const int stride = cfg_.plan.total_stride();
    FusedFeatures fused =
        fuse(ps_, ctx, "fuse", cfg_.fusion, feat_f, feat_e, type_map(layout, stride));

    ForwardOut out;
    out.split_f = split_features(fused.frame, layout, stride);
    out.split_e = split_features(fused.event, layout, stride);
    out.head_f = head_forward(ps_, ctx, "head.frame", out.split_f.x);
    out.head_e = head_forward(ps_, ctx, "head.event", out.split_e.x);
    return out;
}

Var Tracker::forward_train(const SampleInput& s, const Tensor& gt_box, Rng& rng,
                           LossBreakdown* bd) {
    PatchArrangement arr =
        cfg_.use_rpm ? random_arrangement(rng) : PatchArrangement::search_right;
    PatchLayout layout = plan_patchwork(arr, cfg_.template_size, cfg_.template_size,
                                        cfg_.search_size, cfg_.search_size);
    FwdCtx ctx;
    ctx.training = true;
    ctx.mode = SpikeMode::hard;
    ctx.sn = cfg_.sn;

    ForwardOut f = forward(ctx, s, layout);
    const int stride = cfg_.plan.total_stride();
    GroundTruthMaps gt = make_gt_maps(gt_box, cfg_.search_size / stride,
                                      cfg_.search_size / stride);
    return total_loss(f.head_f, f.head_e, gt, f.split_f.z1, f.split_f.z2, f.split_e.z1,
                      f.split_e.z2, cfg_.loss, cfg_.use_str, bd);
}

DecodedBox Tracker::infer(const SampleInput& s, EnergyTrace* trace) {
    PatchLayout layout = plan_patchwork(PatchArrangement::search_right, cfg_.template_size,
                                        cfg_.template_size, cfg_.search_size, cfg_.search_size);
    FwdCtx ctx;
    ctx.training = false;
    ctx.mode = SpikeMode::hard;
    ctx.sn = cfg_.sn;
    ctx.trace = trace;

    ForwardOut f = forward(ctx, s, layout);
    Tensor resp =
        fuse_responses(f.head_f.response.value(), f.head_e.response.value(), cfg_.lambda);
    Tensor off = fuse_responses(f.head_f.offset.value(), f.head_e.offset.value(), cfg_.lambda);
    Tensor sz = fuse_responses(f.head_f.size.value(), f.head_e.size.value(), cfg_.lambda);
    return decode(resp, off, sz, cfg_.hanning);
}

}  // namespace spikefet
