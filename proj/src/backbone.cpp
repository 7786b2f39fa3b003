#include "spikefet/backbone.hpp"

#include <stdexcept>

namespace spikefet {

void StagePlan::validate() const {
    if (depths.empty() || depths.size() != channels.size() || depths.size() != strides.size())
        throw std::invalid_argument("StagePlan: depths/channels/strides must align");
    for (size_t i = 0; i < depths.size(); ++i) {
        if (depths[i] < 0 || channels[i] <= 0 || strides[i] <= 0)
            throw std::invalid_argument("StagePlan: nonpositive entry");
        if (i && channels[i] < channels[i - 1])
            throw std::invalid_argument("StagePlan: channels must be nondecreasing");
    }
}

int StagePlan::total_stride() const {
    int s = 1;
    for (int v : strides) s *= v;
    return s;
}

Var sep_spike_conv(ParamStore& ps, FwdCtx& ctx, const std::string& name, int channels,
                   int dw_kernel, const Var& u) {
    if (dw_kernel % 2 == 0) throw std::invalid_argument("sep_spike_conv: dw kernel must be odd");
    ConvSpec pw{ConvSpec::Kind::pointwise, channels, channels, 1, 1, 0};
    ConvSpec dw{ConvSpec::Kind::depthwise, channels, channels, dw_kernel, 1, (dw_kernel - 1) / 2};
    Var s0 = sn(ctx, u, name + ".sn0");
    Var a = conv_bn(ps, ctx, name + ".pw1", pw, s0, true);
    Var s1 = sn(ctx, a, name + ".sn1");
    Var b = conv_bn(ps, ctx, name + ".dw", dw, s1, true);
    Var s2 = sn(ctx, b, name + ".sn2");
    return conv_bn(ps, ctx, name + ".pw2", pw, s2, true);
}

Var channel_conv(ParamStore& ps, FwdCtx& ctx, const std::string& name, int channels,
                 int expansion, const Var& u) {
    if (expansion < 1) throw std::invalid_argument("channel_conv: expansion must be >= 1");
    const int hidden = channels * expansion;
    ConvSpec c1{ConvSpec::Kind::standard, channels, hidden, 3, 1, 1};
    ConvSpec c2{ConvSpec::Kind::standard, hidden, channels, 3, 1, 1};
    Var s0 = sn(ctx, u, name + ".sn0");
    Var a = conv_bn(ps, ctx, name + ".c1", c1, s0, true);
    Var s1 = sn(ctx, a, name + ".sn1");
    return conv_bn(ps, ctx, name + ".c2", c2, s1, true);
}

Var convformer_block(ParamStore& ps, FwdCtx& ctx, const std::string& name,
                     const ConvFormerConfig& cfg, const Var& u) {
    Var u1 = add(u, sep_spike_conv(ps, ctx, name + ".sep", cfg.channels, cfg.dw_kernel, u));
    return add(u1, channel_conv(ps, ctx, name + ".ch", cfg.channels, cfg.expansion, u1));
}

Var downsample(ParamStore& ps, FwdCtx& ctx, const std::string& name, int in_ch, int out_ch,
               int stride, const Var& x, bool analog_input) {
    Var in = analog_input ? x : sn(ctx, x, name + ".sn_in");
    ConvSpec spec{ConvSpec::Kind::standard, in_ch, out_ch, stride, stride, 0};
    Var y = conv_bn(ps, ctx, name + ".conv", spec, in, !analog_input);
    return sn(ctx, y, name + ".sn");
}

Var extract(ParamStore& ps, FwdCtx& ctx, const std::string& branch, const StagePlan& plan,
            int in_channels, const Var& canvas) {
    plan.validate();
    Var x = canvas;
    int ch = in_channels;
    for (size_t s = 0; s < plan.depths.size(); ++s) {
        const std::string stage = branch + ".s" + std::to_string(s);
        x = downsample(ps, ctx, stage + ".ds", ch, plan.channels[s], plan.strides[s], x, s == 0);
        ch = plan.channels[s];
        ConvFormerConfig cfg;
        cfg.channels = ch;
        for (int d = 0; d < plan.depths[s]; ++d)
            x = convformer_block(ps, ctx, stage + ".b" + std::to_string(d), cfg, x);
    }
    return x;
}

}  // namespace spikefet
