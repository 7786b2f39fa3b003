#pragma once

#include <string>

#include "spikefet/layers.hpp"

namespace spikefet {

struct HeadOutput {
    Var response;  // [1,1,H,W], logistic-squashed scores
    Var offset;    // [1,2,H,W], (x,y) sub-cell offsets in [0,1)
    Var size;      // [1,2,H,W], normalized (w,h) in (0,1]
};

// Per-modality center head: three sub-heads (response/offset/size), each a
// tapering stack of 3 x (conv3x3 + BN + SN) plus a 1x1 projection, all
// squashed by a logistic.
HeadOutput head_forward(ParamStore& ps, FwdCtx& ctx, const std::string& name, const Var& fx);

// R = lambda * R_F + (1 - lambda) * R_E.
Tensor fuse_responses(const Tensor& rf, const Tensor& re, double lambda);

Tensor hann_window(int h, int w);  // outer product of 1-D Hann windows

struct DecodedBox {
    double cx = 0, cy = 0, w = 0, h = 0;  // normalized search coords
    double score = 0;                     // fused response at the peak
    int row = 0, col = 0;                 // argmax cell
};

// response [1,1,H,W]; offset/size [1,2,H,W] (already modality-fused).
// Ties break toward the smallest row-major index.
DecodedBox decode(const Tensor& response, const Tensor& offset, const Tensor& size, bool hanning);

}  // namespace spikefet
