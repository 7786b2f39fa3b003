#include "spikefet/fusion.hpp"

#include <stdexcept>

#include "spikefet/backbone.hpp"
#include "spikefet/spike.hpp"

namespace spikefet {

void AttentionConfig::validate(int channels) const {
    if (heads < 2 || heads % 2 != 0)
        throw std::invalid_argument("attention: heads must be even and >= 2");
    if (channels % heads != 0)
        throw std::invalid_argument("attention: channels not divisible by heads");
    if ((channels * gamma) % heads != 0)
        throw std::invalid_argument("attention: expanded channels not divisible by heads");
    if (stripe_width <= 0) throw std::invalid_argument("attention: stripe width must be positive");
    if (gamma < 1) throw std::invalid_argument("attention: gamma must be >= 1");
}

StripePlan build_stripes(int gh, int gw, int sw, int heads) {
    if (gh <= 0 || gw <= 0 || sw <= 0) throw std::invalid_argument("build_stripes: bad extents");
    StripePlan plan;
    plan.heads = heads;
    const int n = gh * gw;
    for (int y0 = 0; y0 < gh; y0 += sw) {
        const int y1 = std::min(y0 + sw, gh);
        std::vector<int> idx;
        idx.reserve(static_cast<size_t>(2) * (y1 - y0) * gw);
        for (int m = 0; m < 2; ++m)
            for (int y = y0; y < y1; ++y)
                for (int x = 0; x < gw; ++x) idx.push_back(m * n + y * gw + x);
        plan.horizontal.push_back(std::move(idx));
    }
    for (int x0 = 0; x0 < gw; x0 += sw) {
        const int x1 = std::min(x0 + sw, gw);
        std::vector<int> idx;
        idx.reserve(static_cast<size_t>(2) * (x1 - x0) * gh);
        for (int m = 0; m < 2; ++m)
            for (int y = 0; y < gh; ++y)
                for (int x = x0; x < x1; ++x) idx.push_back(m * n + y * gw + x);
        plan.vertical.push_back(std::move(idx));
    }
    return plan;
}

Var add_encodings(ParamStore& ps, FwdCtx& ctx, const std::string& name, const Var& tokens,
                  int modality, const std::vector<int>& type_ids) {
    (void)ctx;
    const int N = tokens.value().dim(0), C = tokens.value().dim(1);
    if (static_cast<int>(type_ids.size()) != N)
        throw std::invalid_argument("add_encodings: type map size mismatch");
    Var ep = ps.weight(name + ".pos", {N, C}, 0.02);
    Var em = ps.weight(name + ".mod", {2, C}, 0.02);
    Var et = ps.weight(name + ".type", {3, C}, 0.02);
    Var out = add(tokens, ep);
    out = add_row_broadcast(out, reshape(gather_rows(em, {modality}), {C}));
    return add(out, gather_rows(et, type_ids));
}

namespace {

double attention_flops(const StripePlan& plan, int d_per_head) {
    double f = 0.0;
    const int group = plan.heads / 2;
    for (const auto& s : plan.horizontal)
        f += static_cast<double>(s.size()) * s.size() * d_per_head * group;
    for (const auto& s : plan.vertical)
        f += static_cast<double>(s.size()) * s.size() * d_per_head * group;
    return f;
}

}  // namespace

Var cswin_ssa(ParamStore& ps, FwdCtx& ctx, const std::string& name, const AttentionConfig& cfg,
              const Var& tokens, int gh, int gw) {
    const int C = tokens.value().dim(1);
    cfg.validate(C);
    if (tokens.value().dim(0) != 2 * gh * gw)
        throw std::invalid_argument("cswin_ssa: token count must be 2*gh*gw");
    const int cv = C * cfg.gamma;
    const int dq = C / cfg.heads;
    const int dv = cv / cfg.heads;
    const double scale =
        cfg.scale > 0.0 ? cfg.scale : 1.0 / (static_cast<double>(dq) * ctx.sn.d_max);

    Var s = sn(ctx, tokens, name + ".sn_in");
    Var q = sn(ctx, linear_bn(ps, ctx, name + ".q", C, C, s, true), name + ".q.sn");
    Var k = sn(ctx, linear_bn(ps, ctx, name + ".k", C, C, s, true), name + ".k.sn");
    Var v = sn(ctx, linear_bn(ps, ctx, name + ".v", C, cv, s, true), name + ".v.sn");

    StripePlan plan = build_stripes(gh, gw, cfg.stripe_width, cfg.heads);
    if (ctx.trace) {
        ctx.trace->add_spike(name + ".qk", attention_flops(plan, dq),
                             firing_rate(q.value()), ctx.sn.d_max);
        ctx.trace->add_spike(name + ".av", attention_flops(plan, dv),
                             firing_rate(v.value()), ctx.sn.d_max);
    }
    Var att = stripe_ssa(q, k, v, plan, scale, ctx.sn, ctx.mode);
    if (ctx.trace) ctx.trace->add_rate(name + ".ssa.sn", firing_rate(att.value()));
    return linear_bn(ps, ctx, name + ".proj", cv, C, att, true);
}

namespace {

// Runs the separable conv token mixer on each modality's grid with shared
// parameters, returning re-concatenated tokens.
Var token_mixer(ParamStore& ps, FwdCtx& ctx, const std::string& name, const Var& tokens, int gh,
                int gw) {
    const int n = gh * gw;
    const int C = tokens.value().dim(1);
    std::vector<Var> outs;
    for (int m = 0; m < 2; ++m) {
        Var img = tokens_to_image(slice_tokens(tokens, m * n, (m + 1) * n), gh, gw);
        Var mixed = sep_spike_conv(ps, ctx, name, C, 7, img);
        outs.push_back(image_to_tokens(mixed));
    }
    return concat_tokens(outs);
}

Var channel_mlp(ParamStore& ps, FwdCtx& ctx, const std::string& name, int expansion,
                const Var& tokens) {
    const int C = tokens.value().dim(1);
    Var s0 = sn(ctx, tokens, name + ".sn0");
    Var a = linear_bn(ps, ctx, name + ".l1", C, C * expansion, s0, true);
    Var s1 = sn(ctx, a, name + ".sn1");
    return linear_bn(ps, ctx, name + ".l2", C * expansion, C, s1, true);
}

}  // namespace

Var transformer_block(ParamStore& ps, FwdCtx& ctx, const std::string& name,
                      const FusionConfig& cfg, const Var& tokens, int gh, int gw) {
    Var u1 = add(tokens, token_mixer(ps, ctx, name + ".sep", tokens, gh, gw));
    Var u2 = add(u1, cswin_ssa(ps, ctx, name + ".attn", cfg.attn, u1, gh, gw));
    return add(u2, channel_mlp(ps, ctx, name + ".mlp", cfg.mlp_expansion, u2));
}

FusedFeatures fuse(ParamStore& ps, FwdCtx& ctx, const std::string& name, const FusionConfig& cfg,
                   const Var& u_frame, const Var& u_event, const std::vector<int>& type_ids) {
    if (!u_frame.value().same_shape(u_event.value()))
        throw std::invalid_argument("fuse: modality grids differ: " + u_frame.value().shape_str() +
                                    " vs " + u_event.value().shape_str());
    const int gh = u_frame.value().dim(2), gw = u_frame.value().dim(3);
    const int n = gh * gw;

    Var tf = add_encodings(ps, ctx, name + ".enc", image_to_tokens(u_frame), 0, type_ids);
    Var te = add_encodings(ps, ctx, name + ".enc", image_to_tokens(u_event), 1, type_ids);
    Var cat = concat_tokens({tf, te});
    for (int d = 0; d < cfg.depth; ++d)
        cat = transformer_block(ps, ctx, name + ".b" + std::to_string(d), cfg, cat, gh, gw);

    FusedFeatures out;
    out.frame = tokens_to_image(slice_tokens(cat, 0, n), gh, gw);
    out.event = tokens_to_image(slice_tokens(cat, n, 2 * n), gh, gw);
    return out;
}

}  // namespace spikefet
