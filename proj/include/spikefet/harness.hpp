#pragma once

#include <string>
#include <vector>

#include "spikefet/config.hpp"
#include "spikefet/events.hpp"
#include "spikefet/image.hpp"
#include "spikefet/tracker.hpp"

namespace spikefet {

struct Box {
    double x = 0, y = 0, w = 0, h = 0;  // pixel units, top-left corner

    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }
};

double iou_boxes(const Box& a, const Box& b);

struct Sequence {
    std::string dir;
    std::vector<Image> frames;
    EventStream events;
    std::vector<Box> gt;
    int64_t frame_interval_us = 40000;

    int64_t frame_time_us(int i) const { return static_cast<int64_t>(i) * frame_interval_us; }
};

// Writes <out_dir>/seq_000 ... each with frames/%06d.png, events.txt (from the
// clean frames), groundtruth.txt ("x,y,w,h" per line). Corruptions touch the
// stored frames only, never the events.
void gen_dataset(const std::string& out_dir, const DataConfig& d, uint64_t seed);

std::vector<std::string> list_sequences(const std::string& data_dir);
Sequence load_sequence(const std::string& dir, int64_t frame_interval_us);

// Square crop of side `side` centered at (cx, cy), zero-padded, resized to
// out_size, scaled to [0,1].
Tensor crop_frame_patch(const Image& img, double cx, double cy, double side, int out_size);

// Event counterpart: events in [t0, t1] remapped into an out_size grid over
// the crop window, binned, then percentile-normalized.
Tensor crop_event_patch(const EventStream& ev, int64_t t0, int64_t t1, int bins, double cx,
                        double cy, double side, int out_size);

struct CropWindow {
    int x0 = 0, y0 = 0, side = 1;
};
CropWindow crop_window(double cx, double cy, double side);

struct TrainResult {
    bool diverged = false;
    int steps_done = 0;
    double first_window_avg = 0;  // moving average of L_track around step 10
    double last_window_avg = 0;   // moving average over the final 10 steps
    std::vector<double> losses;
};

TrainResult train(Tracker& tracker, const std::vector<Sequence>& data, const TrainConfig& tc,
                  uint64_t seed, const std::string& out_dir);

struct Metrics {
    double auc = 0;
    double pr = 0;
    int frames = 0;
};

// Success averaged over IoU thresholds {0, 0.05, ..., 1.0} (success = IoU >=
// threshold) and precision at `precision_px` center error.
Metrics score_tracks(const std::vector<Sequence>& data,
                     const std::vector<std::vector<Box>>& tracks, double precision_px);

struct EvalResult {
    Metrics metrics;
    std::vector<std::vector<Box>> tracks;  // predictions for frames 1..L-1
    std::vector<std::vector<double>> scores;
};

// Runs the tracker across each sequence (frame 0 initializes the templates).
// When out_dir is nonempty, writes per-sequence track files and metrics.txt.
EvalResult evaluate(Tracker& tracker, const std::vector<Sequence>& data, const EvalConfig& ec,
                    const std::string& out_dir);

// Constant-box reference: repeats each sequence's initial box.
std::vector<std::vector<Box>> static_tracks(const std::vector<Sequence>& data);

// Box overlays rendered into <out_dir>/demo_%06d.png.
void render_demo(const Sequence& seq, const std::vector<Box>& track, const std::string& out_dir);

// One inference sample assembled from a sequence (templates from frame 0,
// search at `frame`), for the energy profiler and smoke paths.
SampleInput sample_from_sequence(const Sequence& seq, int frame, const ModelConfig& mc,
                                 const EvalConfig& ec);

}  // namespace spikefet
