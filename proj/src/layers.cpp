#include "spikefet/layers.hpp"

#include <cmath>

#include "spikefet/spike.hpp"

namespace spikefet {

Var sn(FwdCtx& ctx, const Var& x, const std::string& name) {
    Var out = spike(x, ctx.sn, ctx.mode);
    if (ctx.trace && !name.empty()) ctx.trace->add_rate(name, firing_rate(out.value()));
    return out;
}

double conv_flops(const ConvSpec& spec, const Tensor& input) {
    const int T = input.dim(0);
    const int ho = spec.out_extent(input.dim(2));
    const int wo = spec.out_extent(input.dim(3));
    const double per_out = spec.kind == ConvSpec::Kind::depthwise
                               ? static_cast<double>(spec.kernel) * spec.kernel
                               : static_cast<double>(spec.kernel) * spec.kernel * spec.in_channels;
    return static_cast<double>(T) * spec.out_channels * ho * wo * per_out;
}

namespace {

void trace_synapse(FwdCtx& ctx, const std::string& name, double flops, const Var& x,
                   bool spiking_input) {
    if (!ctx.trace) return;
    if (spiking_input)
        ctx.trace->add_spike(name, flops, firing_rate(x.value()), ctx.sn.d_max);
    else
        ctx.trace->add_analog(name, flops);
}

}  // namespace

Var conv_bn(ParamStore& ps, FwdCtx& ctx, const std::string& name, const ConvSpec& spec,
            const Var& x, bool spiking_input) {
    const double fan_in = spec.kind == ConvSpec::Kind::depthwise
                              ? static_cast<double>(spec.kernel) * spec.kernel
                              : static_cast<double>(spec.kernel) * spec.kernel * spec.in_channels;
    Var w = ps.weight(name + ".w", spec.weight_shape(), std::sqrt(2.0 / fan_in));
    trace_synapse(ctx, name, conv_flops(spec, x.value()), x, spiking_input);
    Var y = conv2d(x, w, Var(), spec);
    Var gamma = ps.constant(name + ".bn.g", {spec.out_channels}, 1.0);
    Var beta = ps.constant(name + ".bn.b", {spec.out_channels}, 0.5);
    return batch_norm(y, gamma, beta, ps.bn_state(name + ".bn"), ctx.training);
}

Var conv_bias(ParamStore& ps, FwdCtx& ctx, const std::string& name, const ConvSpec& spec,
              const Var& x, bool spiking_input) {
    const double fan_in = static_cast<double>(spec.kernel) * spec.kernel * spec.in_channels;
    Var w = ps.weight(name + ".w", spec.weight_shape(), std::sqrt(2.0 / fan_in));
    Var b = ps.constant(name + ".b", {spec.out_channels}, 0.0);
    trace_synapse(ctx, name, conv_flops(spec, x.value()), x, spiking_input);
    return conv2d(x, w, b, spec);
}

Var linear_bn(ParamStore& ps, FwdCtx& ctx, const std::string& name, int in_ch, int out_ch,
              const Var& x, bool spiking_input) {
    Var w = ps.weight(name + ".w", {in_ch, out_ch}, std::sqrt(2.0 / in_ch));
    trace_synapse(ctx, name,
                  static_cast<double>(x.value().dim(0)) * in_ch * out_ch, x, spiking_input);
    Var y = linear(x, w, Var());
    Var gamma = ps.constant(name + ".bn.g", {out_ch}, 1.0);
    Var beta = ps.constant(name + ".bn.b", {out_ch}, 0.5);
    return batch_norm(y, gamma, beta, ps.bn_state(name + ".bn"), ctx.training);
}

}  // namespace spikefet
