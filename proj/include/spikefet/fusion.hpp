#pragma once

#include <string>
#include <vector>

#include "spikefet/layers.hpp"

namespace spikefet {

struct AttentionConfig {
    int heads = 4;         // first half horizontal stripes, second half vertical
    int stripe_width = 4;  // sw: stripe height (horizontal) / width (vertical)
    int gamma = 2;         // value-path channel expansion
    double scale = 0.0;    // <= 0 picks 1 / (d_head * D)

    void validate(int channels) const;
};

struct FusionConfig {
    int depth = 2;
    int mlp_expansion = 4;
    AttentionConfig attn;
};

// Stripe index lists over the two concatenated modality grids (tokens
// 0..gh*gw-1 are modality 0, the rest modality 1). A stripe holds the same
// rows (or columns) of BOTH grids, so attention mixes modalities. The last
// stripe shrinks when sw does not divide the extent.
StripePlan build_stripes(int gh, int gw, int sw, int heads);

// U' = U + E_p + E_m + E_t on one modality's token matrix [N, C].
Var add_encodings(ParamStore& ps, FwdCtx& ctx, const std::string& name, const Var& tokens,
                  int modality, const std::vector<int>& type_ids);

// Eqs. QKV: Q,K = SN(Linear(U)), V = SN(Linear_gamma(U)); stripe attention
// SN(scale * Q K^T V); output projected back by Linear_{1/gamma}.
Var cswin_ssa(ParamStore& ps, FwdCtx& ctx, const std::string& name, const AttentionConfig& cfg,
              const Var& tokens, int gh, int gw);

// Three residual stages: token-mixer conv, stripe attention, channel MLP.
Var transformer_block(ParamStore& ps, FwdCtx& ctx, const std::string& name,
                      const FusionConfig& cfg, const Var& tokens, int gh, int gw);

struct FusedFeatures {
    Var frame;  // [1,C,gh,gw]
    Var event;
};

FusedFeatures fuse(ParamStore& ps, FwdCtx& ctx, const std::string& name, const FusionConfig& cfg,
                   const Var& u_frame, const Var& u_event, const std::vector<int>& type_ids);

}  // namespace spikefet
