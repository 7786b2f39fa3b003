#include "spikefet/events.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spikefet {

Tensor events_to_frames(const EventStream& s, int64_t t0, int64_t t1, int bins) {
    if (t1 <= t0) throw std::invalid_argument("events_to_frames: empty time window");
    if (bins <= 0) throw std::invalid_argument("events_to_frames: bins must be positive");
    if (s.height <= 0 || s.width <= 0)
        throw std::invalid_argument("events_to_frames: stream has no geometry");
    Tensor out({1, 2 * bins, s.height, s.width});
    const int64_t span = t1 - t0;
    for (const Event& e : s.events) {
        if (e.t_us < t0 || e.t_us > t1) continue;
        int64_t b = (static_cast<int64_t>(bins) * (e.t_us - t0)) / span;
        if (b == bins) b = bins - 1;  // t == t1
        int c = 2 * static_cast<int>(b) + (e.polarity > 0 ? 0 : 1);
        out.at4(0, c, e.y, e.x) += 1.0;
    }
    return out;
}

void normalize_event_frames(Tensor& frames) {
    std::vector<double> pos;
    pos.reserve(static_cast<size_t>(frames.numel()));
    for (int i = 0; i < frames.numel(); ++i)
        if (frames[i] > 0.0) pos.push_back(frames[i]);
    if (pos.empty()) return;
    std::sort(pos.begin(), pos.end());
    double p99 = pos[static_cast<size_t>(std::floor(0.99 * (pos.size() - 1)))];
    if (p99 <= 0.0) return;
    for (int i = 0; i < frames.numel(); ++i)
        frames[i] = std::min(frames[i] / p99, 1.0);
}

std::vector<Event> synthesize_events(const Image& prev, const Image& next, double theta,
                                     int64_t t_prev_us, int64_t t_next_us) {
    if (prev.height != next.height || prev.width != next.width)
        throw std::invalid_argument("synthesize_events: frame size mismatch");
    if (theta <= 0.0) throw std::invalid_argument("synthesize_events: theta must be positive");
    if (t_next_us <= t_prev_us)
        throw std::invalid_argument("synthesize_events: nonpositive frame interval");

    std::vector<Event> out;
    const int64_t span = t_next_us - t_prev_us;
    for (int y = 0; y < prev.height; ++y) {
        for (int x = 0; x < prev.width; ++x) {
            double d = std::log(next.at(y, x) + 1.0) - std::log(prev.at(y, x) + 1.0);
            int k = static_cast<int>(std::floor(std::abs(d) / theta));
            if (k <= 0) continue;
            int p = d > 0.0 ? 1 : -1;
            for (int i = 0; i < k; ++i) {
                int64_t t = t_prev_us + ((2 * static_cast<int64_t>(i) + 1) * span) / (2 * k);
                out.push_back({t, x, y, p});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) {
        if (a.t_us != b.t_us) return a.t_us < b.t_us;
        if (a.y != b.y) return a.y < b.y;
        if (a.x != b.x) return a.x < b.x;
        return a.polarity < b.polarity;
    });
    return out;
}

void write_event_file(const std::string& path, const EventStream& s) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_event_file: cannot open " + path);
    os << "# " << s.height << " " << s.width << "\n";
    for (const Event& e : s.events)
        os << e.t_us << " " << e.x << " " << e.y << " " << e.polarity << "\n";
    if (!os) throw std::runtime_error("write_event_file: write failed for " + path);
}

EventStream read_event_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_event_file: cannot open " + path);
    EventStream s;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& why) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + why);
    };
    if (!std::getline(is, line)) throw std::runtime_error(path + ": empty event file");
    lineno = 1;
    {
        std::istringstream hs(line);
        char hash = 0;
        if (!(hs >> hash) || hash != '#' || !(hs >> s.height >> s.width) || s.height <= 0 ||
            s.width <= 0)
            fail("expected header '# <height> <width>'");
    }
    int64_t last_t = INT64_MIN;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Event e;
        std::string extra;
        if (!(ls >> e.t_us >> e.x >> e.y >> e.polarity) || (ls >> extra))
            fail("malformed event line '" + line + "'");
        if (e.polarity != 1 && e.polarity != -1) fail("polarity must be 1 or -1");
        if (e.x < 0 || e.x >= s.width || e.y < 0 || e.y >= s.height)
            fail("event coordinates outside the sensor");
        if (e.t_us < last_t) fail("timestamps out of order");
        last_t = e.t_us;
        s.events.push_back(e);
    }
    return s;
}

}  // namespace spikefet
