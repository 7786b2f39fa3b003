#include "spikefet/head.hpp"

#include <cmath>
#include <stdexcept>

namespace spikefet {

namespace {

Var sub_head(ParamStore& ps, FwdCtx& ctx, const std::string& name, const Var& fx, int out_ch) {
    const int c = fx.value().dim(1);
    if (c % 4 != 0) throw std::invalid_argument("head: channels must be divisible by 4");
    const int taper[3] = {c / 2, c / 4, c / 4};
    Var x = fx;
    int in = c;
    for (int i = 0; i < 3; ++i) {
        ConvSpec spec{ConvSpec::Kind::standard, in, taper[i], 3, 1, 1};
        x = conv_bn(ps, ctx, name + ".c" + std::to_string(i), spec, x, true);
        x = sn(ctx, x, name + ".sn" + std::to_string(i));
        in = taper[i];
    }
    ConvSpec last{ConvSpec::Kind::pointwise, in, out_ch, 1, 1, 0};
    return logistic(conv_bias(ps, ctx, name + ".out", last, x, true));
}

}  // namespace

HeadOutput head_forward(ParamStore& ps, FwdCtx& ctx, const std::string& name, const Var& fx) {
    // The fused features are a residual stream, not spikes; re-spike once so
    // every head convolution consumes spike counts.
    Var s = sn(ctx, fx, name + ".sn_in");
    HeadOutput out;
    out.response = sub_head(ps, ctx, name + ".resp", s, 1);
    out.offset = sub_head(ps, ctx, name + ".off", s, 2);
    out.size = sub_head(ps, ctx, name + ".size", s, 2);
    return out;
}

Tensor fuse_responses(const Tensor& rf, const Tensor& re, double lambda) {
    if (!rf.same_shape(re)) throw std::invalid_argument("fuse_responses: shape mismatch");
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("fuse_responses: lambda outside [0,1]");
    Tensor out = rf;
    for (int i = 0; i < out.numel(); ++i) out[i] = lambda * rf[i] + (1.0 - lambda) * re[i];
    return out;
}

Tensor hann_window(int h, int w) {
    auto hann1 = [](int i, int n) {
        if (n == 1) return 1.0;
        return 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (n - 1)));
    };
    Tensor out({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out[y * w + x] = hann1(y, h) * hann1(x, w);
    return out;
}

DecodedBox decode(const Tensor& response, const Tensor& offset, const Tensor& size, bool hanning) {
    if (response.ndim() != 4 || response.dim(1) != 1)
        throw std::invalid_argument("decode: response must be [1,1,H,W]");
    const int H = response.dim(2), W = response.dim(3);
    if (offset.ndim() != 4 || offset.dim(1) != 2 || offset.dim(2) != H || offset.dim(3) != W ||
        !offset.same_shape(size))
        throw std::invalid_argument("decode: offset/size must be [1,2,H,W]");

    Tensor ranked = response;
    if (hanning) {
        Tensor wnd = hann_window(H, W);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) ranked.at4(0, 0, y, x) *= wnd[y * W + x];
    }
    int best_y = 0, best_x = 0;
    double best = ranked.at4(0, 0, 0, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (ranked.at4(0, 0, y, x) > best) {
                best = ranked.at4(0, 0, y, x);
                best_y = y;
                best_x = x;
            }

    DecodedBox b;
    b.row = best_y;
    b.col = best_x;
    b.score = response.at4(0, 0, best_y, best_x);
    b.cx = (best_x + offset.at4(0, 0, best_y, best_x)) / W;
    b.cy = (best_y + offset.at4(0, 1, best_y, best_x)) / H;
    b.w = size.at4(0, 0, best_y, best_x);
    b.h = size.at4(0, 1, best_y, best_x);
    return b;
}

}  // namespace spikefet
