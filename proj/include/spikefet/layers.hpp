#pragma once

#include <string>

#include "spikefet/autograd.hpp"
#include "spikefet/energy.hpp"
#include "spikefet/params.hpp"

namespace spikefet {

struct FwdCtx {
    bool training = true;
    SpikeMode mode = SpikeMode::hard;
    SpikeNeuronConfig sn{};
    EnergyTrace* trace = nullptr;  // optional op/firing recorder
};

// Spiking activation; records the output firing rate when tracing.
Var sn(FwdCtx& ctx, const Var& x, const std::string& name = "");

// Convolution (no bias) followed by batch norm. `spiking_input` selects
// MAC vs. AC accounting in the trace.
Var conv_bn(ParamStore& ps, FwdCtx& ctx, const std::string& name, const ConvSpec& spec,
            const Var& x, bool spiking_input);

// Bare convolution with bias (head output projections).
Var conv_bias(ParamStore& ps, FwdCtx& ctx, const std::string& name, const ConvSpec& spec,
              const Var& x, bool spiking_input);

// Linear (no bias) followed by batch norm over token rows.
Var linear_bn(ParamStore& ps, FwdCtx& ctx, const std::string& name, int in_ch, int out_ch,
              const Var& x, bool spiking_input);

double conv_flops(const ConvSpec& spec, const Tensor& input);

}  // namespace spikefet
