#pragma once

#include <string>
#include <vector>

#include "spikefet/layers.hpp"

namespace spikefet {

struct ConvFormerConfig {
    int channels = 0;
    int dw_kernel = 7;
    int expansion = 2;  // channel-conv hidden width multiplier
};

struct StagePlan {
    std::vector<int> depths{1, 1, 2};
    std::vector<int> channels{16, 32, 64};
    std::vector<int> strides{4, 2, 2};

    void validate() const;
    int total_stride() const;
    int out_channels() const { return channels.back(); }
};

// Conv_pw2(SN(Conv_dw(SN(Conv_pw1(SN(u)))))), batch norm after each conv.
Var sep_spike_conv(ParamStore& ps, FwdCtx& ctx, const std::string& name, int channels,
                   int dw_kernel, const Var& u);

// Conv3x3(SN(Conv3x3(SN(u)))) expanding to channels*expansion in the middle.
Var channel_conv(ParamStore& ps, FwdCtx& ctx, const std::string& name, int channels,
                 int expansion, const Var& u);

// u'' = (u + sep_spike_conv(u)) + channel_conv(u + sep_spike_conv(u))
Var convformer_block(ParamStore& ps, FwdCtx& ctx, const std::string& name,
                     const ConvFormerConfig& cfg, const Var& u);

// Strided conv (kernel == stride) + BN + SN. Non-analog inputs are spiked
// first so every synaptic layer consumes spikes (the stem is the only MAC).
Var downsample(ParamStore& ps, FwdCtx& ctx, const std::string& name, int in_ch, int out_ch,
               int stride, const Var& x, bool analog_input);

// One modality branch: stages of downsample + ConvFormer blocks.
Var extract(ParamStore& ps, FwdCtx& ctx, const std::string& branch, const StagePlan& plan,
            int in_channels, const Var& canvas);

}  // namespace spikefet
