#pragma once

#include <string>

#include "spikefet/backbone.hpp"
#include "spikefet/energy.hpp"
#include "spikefet/fusion.hpp"
#include "spikefet/head.hpp"
#include "spikefet/losses.hpp"
#include "spikefet/params.hpp"
#include "spikefet/patchwork.hpp"

namespace spikefet {

struct ModelConfig {
    StagePlan plan;
    FusionConfig fusion;
    int event_bins = 3;
    int template_size = 64;
    int search_size = 128;
    double lambda = 0.5;  // response fusion weight
    bool use_rpm = true;  // random layouts at training time
    bool use_str = true;
    bool hanning = true;
    SpikeNeuronConfig sn;
    LossWeights loss;

    int frame_channels() const { return 1; }
    int event_channels() const { return 2 * event_bins; }
    void validate() const;
};

// Patches for one training triplet or one inference step, both modalities.
struct SampleInput {
    Tensor z1_frame, z2_frame, x_frame;  // [1,1,hz,hz] / [1,1,hx,hx]
    Tensor z1_event, z2_event, x_event;  // [1,2B,...]
};

class Tracker {
   public:
    Tracker(const ModelConfig& cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return ps_; }

    // Training graph: random patchwork layout (when RPM is on), hard spikes,
    // batch-stat BN. gt_box is (cx,cy,w,h) in search coordinates.
    Var forward_train(const SampleInput& s, const Tensor& gt_box, Rng& rng, LossBreakdown* bd);

    // Inference: fixed layout, running-stat BN; optionally records an energy
    // trace of the forward pass.
    DecodedBox infer(const SampleInput& s, EnergyTrace* trace = nullptr);

   private:
    struct ForwardOut {
        HeadOutput head_f, head_e;
        SplitFeatures split_f, split_e;
    };
    ForwardOut forward(FwdCtx& ctx, const SampleInput& s, const PatchLayout& layout);

    ModelConfig cfg_;
    ParamStore ps_;
};

}  // namespace spikefet
