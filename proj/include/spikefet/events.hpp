#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikefet/image.hpp"
#include "spikefet/tensor.hpp"

namespace spikefet {

struct Event {
    int64_t t_us = 0;
    int x = 0;
    int y = 0;
    int polarity = 1;  // +1 or -1
};

struct EventStream {
    int height = 0;
    int width = 0;
    std::vector<Event> events;  // nondecreasing t_us
};

// Accumulates events with t in [t0, t1] into B temporal bins. An event lands
// in bin (B * (t - t0)) / (t1 - t0) using exact integer arithmetic, so an
// event on an interior bin edge belongs to the later bin; t == t1 joins the
// last bin. Output [1, 2B, H, W]: channel 2b holds positive counts of bin b,
// channel 2b+1 negative counts.
Tensor events_to_frames(const EventStream& s, int64_t t0, int64_t t1, int bins);

// Divides by the 99th percentile of the positive entries and clips to [0, 1].
// All-zero tensors pass through unchanged.
void normalize_event_frames(Tensor& frames);

// Emits floor(|log(I2+1) - log(I1+1)| / theta) events per pixel between two
// frames, spread evenly over (t_prev, t_next); output sorted by (t, y, x, p).
std::vector<Event> synthesize_events(const Image& prev, const Image& next, double theta,
                                     int64_t t_prev_us, int64_t t_next_us);

// Text format: first line "# <height> <width>", then one "t_us x y p" line
// per event with p in {1, -1}. Timestamps must be nondecreasing.
void write_event_file(const std::string& path, const EventStream& s);
EventStream read_event_file(const std::string& path);

}  // namespace spikefet
