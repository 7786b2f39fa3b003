#include "spikefet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace spikefet {

double iou_boxes(const Box& a, const Box& b) {
    // Every term below is built from the same corner coordinates, so two
    // bit-identical boxes score exactly 1 (a toolkit must give the ground
    // truth a perfect score); mixing corner differences with w*h does not.
    const double ax1 = a.x + a.w, ay1 = a.y + a.h;
    const double bx1 = b.x + b.w, by1 = b.y + b.h;
    const double ix = std::max(0.0, std::min(ax1, bx1) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(ay1, by1) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double area_a = (ax1 - a.x) * (ay1 - a.y);
    const double area_b = (bx1 - b.x) * (by1 - b.y);
    const double uni = area_a + area_b - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct MovingRect {
    double cx, cy, w, h, vx, vy;
    int intensity;
};

void bounce(MovingRect& r, int W, int H) {
    r.cx += r.vx;
    r.cy += r.vy;
    if (r.cx - r.w / 2 < 1) { r.cx = 1 + r.w / 2; r.vx = -r.vx; }
    if (r.cx + r.w / 2 > W - 1) { r.cx = W - 1 - r.w / 2; r.vx = -r.vx; }
    if (r.cy - r.h / 2 < 1) { r.cy = 1 + r.h / 2; r.vy = -r.vy; }
    if (r.cy + r.h / 2 > H - 1) { r.cy = H - 1 - r.h / 2; r.vy = -r.vy; }
}

void fill_rect(Image& img, const MovingRect& r) {
    int x0 = std::max(0, static_cast<int>(std::lround(r.cx - r.w / 2)));
    int y0 = std::max(0, static_cast<int>(std::lround(r.cy - r.h / 2)));
    int x1 = std::min(img.width, static_cast<int>(std::lround(r.cx + r.w / 2)));
    int y1 = std::min(img.height, static_cast<int>(std::lround(r.cy + r.h / 2)));
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) img.at(y, x) = static_cast<uint8_t>(r.intensity);
}

Image corrupt(const Image& img, const std::string& kind) {
    if (kind == "none") return img;
    Image out = img;
    if (kind == "low_light") {
        for (auto& p : out.pix) p = static_cast<uint8_t>(std::lround(p * 0.08));
    } else if (kind == "overexposure") {
        for (auto& p : out.pix)
            p = static_cast<uint8_t>(std::min(255L, std::lround(p * 2.2 + 70.0)));
    } else if (kind == "blur") {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                int s = 0, n = 0;
                for (int dy = -2; dy <= 2; ++dy) {
                    for (int dx = -2; dx <= 2; ++dx) {
                        int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) continue;
                        s += img.at(yy, xx);
                        ++n;
                    }
                }
                out.at(y, x) = static_cast<uint8_t>(s / n);
            }
        }
    } else {
        throw std::invalid_argument("unknown corruption '" + kind + "'");
    }
    return out;
}

std::string seq_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%03d", i);
    return buf;
}

std::string frame_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d.png", i);
    return buf;
}

}  // namespace

void gen_dataset(const std::string& out_dir, const DataConfig& d, uint64_t seed) {
    if (d.length < 8) throw std::invalid_argument("gen_dataset: sequences too short");
    Rng master(seed);
    fs::create_directories(out_dir);
    for (int s = 0; s < d.sequences; ++s) {
        Rng rng = master.fork();
        const fs::path dir = fs::path(out_dir) / seq_name(s);
        fs::create_directories(dir / "frames");

        const int W = d.canvas, H = d.canvas;
        Image base(H, W);
        for (auto& p : base.pix)
            p = static_cast<uint8_t>(40 + rng.below(28));

        MovingRect target;
        target.w = rng.uniform(d.min_size, d.max_size);
        target.h = rng.uniform(d.min_size, d.max_size);
        target.cx = rng.uniform(target.w / 2 + 4, W - target.w / 2 - 4);
        target.cy = rng.uniform(target.h / 2 + 4, H - target.h / 2 - 4);
        double ang = rng.uniform(0.0, 6.28318530717958647692);
        double speed = rng.uniform(d.max_speed * 0.5, d.max_speed);
        target.vx = speed * std::cos(ang);
        target.vy = speed * std::sin(ang);
        target.intensity = 205 + rng.below(40);

        std::vector<MovingRect> distractors;
        for (int k = 0; k < d.distractors; ++k) {
            MovingRect r;
            r.w = rng.uniform(d.min_size * 0.7, d.max_size * 0.7);
            r.h = rng.uniform(d.min_size * 0.7, d.max_size * 0.7);
            r.cx = rng.uniform(r.w / 2 + 2, W - r.w / 2 - 2);
            r.cy = rng.uniform(r.h / 2 + 2, H - r.h / 2 - 2);
            double a2 = rng.uniform(0.0, 6.28318530717958647692);
            double sp = rng.uniform(0.3, d.max_speed * 0.5);
            r.vx = sp * std::cos(a2);
            r.vy = sp * std::sin(a2);
            r.intensity = 110 + rng.below(40);
            distractors.push_back(r);
        }

        std::ofstream gt(dir / "groundtruth.txt");
        if (!gt) throw std::runtime_error("gen_dataset: cannot write ground truth");
        EventStream ev;
        ev.height = H;
        ev.width = W;
        Image prev_clean;
        for (int f = 0; f < d.length; ++f) {
            if (f > 0) {
                bounce(target, W, H);
                for (auto& r : distractors) bounce(r, W, H);
            }
            Image clean = base;
            for (const auto& r : distractors) fill_rect(clean, r);
            fill_rect(clean, target);

            if (f > 0) {
                auto evs = synthesize_events(prev_clean, clean, d.event_theta,
                                             (f - 1) * d.frame_interval_us,
                                             f * d.frame_interval_us);
                ev.events.insert(ev.events.end(), evs.begin(), evs.end());
            }
            prev_clean = clean;

            png_write((dir / "frames" / frame_name(f)).string(), corrupt(clean, d.corruption));
            gt << fmt(target.cx - target.w / 2) << "," << fmt(target.cy - target.h / 2) << ","
               << fmt(target.w) << "," << fmt(target.h) << "\n";
        }
        write_event_file((dir / "events.txt").string(), ev);
    }
}

std::vector<std::string> list_sequences(const std::string& data_dir) {
    if (!fs::is_directory(data_dir))
        throw std::runtime_error("data directory not found: " + data_dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(data_dir))
        if (e.is_directory() && fs::exists(e.path() / "groundtruth.txt"))
            out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error("no sequences under " + data_dir);
    return out;
}

Sequence load_sequence(const std::string& dir, int64_t frame_interval_us) {
    Sequence s;
    s.dir = dir;
    s.frame_interval_us = frame_interval_us;

    std::vector<std::string> frame_paths;
    for (const auto& e : fs::directory_iterator(fs::path(dir) / "frames"))
        if (e.path().extension() == ".png") frame_paths.push_back(e.path().string());
    std::sort(frame_paths.begin(), frame_paths.end());
    for (const auto& p : frame_paths) s.frames.push_back(png_read(p));
    if (s.frames.empty()) throw std::runtime_error("no frames under " + dir);

    std::ifstream gt(fs::path(dir) / "groundtruth.txt");
    if (!gt) throw std::runtime_error("missing groundtruth.txt under " + dir);
    std::string line;
    int lineno = 0;
    while (std::getline(gt, line)) {
        ++lineno;
        if (line.empty()) continue;
        Box b;
        char c1, c2, c3;
        std::istringstream ls(line);
        if (!(ls >> b.x >> c1 >> b.y >> c2 >> b.w >> c3 >> b.h) || c1 != ',' || c2 != ',' ||
            c3 != ',')
            throw std::runtime_error(dir + "/groundtruth.txt:" + std::to_string(lineno) +
                                     ": expected 'x,y,w,h'");
        s.gt.push_back(b);
    }
    if (s.gt.size() != s.frames.size())
        throw std::runtime_error(dir + ": ground truth count != frame count");

    s.events = read_event_file((fs::path(dir) / "events.txt").string());
    return s;
}

CropWindow crop_window(double cx, double cy, double side) {
    CropWindow w;
    w.side = std::max(8, static_cast<int>(std::lround(side)));
    w.x0 = static_cast<int>(std::lround(cx - 0.5 * w.side));
    w.y0 = static_cast<int>(std::lround(cy - 0.5 * w.side));
    return w;
}

Tensor crop_frame_patch(const Image& img, double cx, double cy, double side, int out_size) {
    CropWindow w = crop_window(cx, cy, side);
    Image crop = crop_with_pad(img, w.y0, w.x0, w.side, w.side);
    Image scaled = bilinear_resize(crop, out_size, out_size);
    Tensor t({1, 1, out_size, out_size});
    for (int y = 0; y < out_size; ++y)
        for (int x = 0; x < out_size; ++x) t.at4(0, 0, y, x) = scaled.at(y, x) / 255.0;
    return t;
}

Tensor crop_event_patch(const EventStream& ev, int64_t t0, int64_t t1, int bins, double cx,
                        double cy, double side, int out_size) {
    if (t1 <= t0) throw std::invalid_argument("crop_event_patch: empty time window");
    CropWindow w = crop_window(cx, cy, side);
    Tensor out({1, 2 * bins, out_size, out_size});
    const int64_t span = t1 - t0;
    for (const Event& e : ev.events) {
        if (e.t_us < t0 || e.t_us > t1) continue;
        int rx = e.x - w.x0, ry = e.y - w.y0;
        if (rx < 0 || rx >= w.side || ry < 0 || ry >= w.side) continue;
        int64_t b = (static_cast<int64_t>(bins) * (e.t_us - t0)) / span;
        if (b == bins) b = bins - 1;
        int xo = static_cast<int>((static_cast<int64_t>(rx) * out_size) / w.side);
        int yo = static_cast<int>((static_cast<int64_t>(ry) * out_size) / w.side);
        out.at4(0, 2 * static_cast<int>(b) + (e.polarity > 0 ? 0 : 1), yo, xo) += 1.0;
    }
    normalize_event_frames(out);
    return out;
}

namespace {

double box_side(const Box& b, double factor) { return factor * std::max(b.w, b.h); }

SampleInput make_train_sample(const Sequence& seq, int i, int j, int k, double jx, double jy,
                              const ModelConfig& mc, const TrainConfig& tc, Tensor* gt_out) {
    const Box &bi = seq.gt[i], &bj = seq.gt[j], &bk = seq.gt[k];
    SampleInput s;
    const int B = mc.event_bins;

    auto tmpl = [&](int idx, const Box& b, Tensor* frame, Tensor* event) {
        double side = box_side(b, tc.template_factor);
        *frame = crop_frame_patch(seq.frames[idx], b.cx(), b.cy(), side, mc.template_size);
        *event = crop_event_patch(seq.events, seq.frame_time_us(idx - 1), seq.frame_time_us(idx),
                                  B, b.cx(), b.cy(), side, mc.template_size);
    };
    tmpl(i, bi, &s.z1_frame, &s.z1_event);
    tmpl(j, bj, &s.z2_frame, &s.z2_event);

    const double scx = bk.cx() + jx, scy = bk.cy() + jy;
    const double side = box_side(bk, tc.search_factor);
    s.x_frame = crop_frame_patch(seq.frames[k], scx, scy, side, mc.search_size);
    s.x_event = crop_event_patch(seq.events, seq.frame_time_us(k - 1), seq.frame_time_us(k), B,
                                 scx, scy, side, mc.search_size);

    CropWindow w = crop_window(scx, scy, side);
    *gt_out = Tensor({4}, {(bk.cx() - w.x0) / w.side, (bk.cy() - w.y0) / w.side, bk.w / w.side,
                           bk.h / w.side});
    return s;
}

}  // namespace

TrainResult train(Tracker& tracker, const std::vector<Sequence>& data, const TrainConfig& tc,
                  uint64_t seed, const std::string& out_dir) {
    if (data.empty()) throw std::invalid_argument("train: no sequences");
    for (const auto& s : data)
        if (static_cast<int>(s.gt.size()) < 8)
            throw std::invalid_argument("train: sequence too short: " + s.dir);
    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "train_log.txt");
    if (!log) throw std::runtime_error("train: cannot open log");

    Rng rng(seed);
    TrainResult res;
    auto snapshot = tracker.params().snapshot_values();
    bool have_params = false;

    for (int step = 1; step <= tc.steps; ++step) {
        tracker.params().zero_grads();
        Var total;
        LossBreakdown acc{};
        for (int b = 0; b < tc.batch; ++b) {
            const Sequence& seq = data[rng.below(static_cast<int>(data.size()))];
            const int L = static_cast<int>(seq.gt.size());
            int i = 1 + rng.below(L - 5);
            int j = i + 1 + rng.below(2);
            int k = std::min(L - 1, j + rng.below(3));
            double jx = rng.uniform(-static_cast<double>(tc.jitter_px), tc.jitter_px);
            double jy = rng.uniform(-static_cast<double>(tc.jitter_px), tc.jitter_px);

            Tensor gt_box;
            SampleInput s =
                make_train_sample(seq, i, j, k, jx, jy, tracker.config(), tc, &gt_box);
            LossBreakdown bd;
            Var loss = tracker.forward_train(s, gt_box, rng, &bd);
            total = b == 0 ? loss : add(total, loss);
            acc.total += bd.total;
            acc.cls_f += bd.cls_f;
            acc.iou_f += bd.iou_f;
            acc.l1_f += bd.l1_f;
            acc.cls_e += bd.cls_e;
            acc.iou_e += bd.iou_e;
            acc.l1_e += bd.l1_e;
            acc.res += bd.res;
            acc.sim += bd.sim;
        }
        if (tc.batch > 1) total = scale(total, 1.0 / tc.batch);
        const double inv = 1.0 / tc.batch;
        const double lt = total.value()[0];

        if (!std::isfinite(lt)) {
            res.diverged = true;
            if (have_params) tracker.params().restore_values(snapshot);
            break;
        }
        log << step << " " << fmt(lt) << " " << fmt(acc.cls_f * inv) << " "
            << fmt(acc.iou_f * inv) << " " << fmt(acc.l1_f * inv) << " " << fmt(acc.cls_e * inv)
            << " " << fmt(acc.iou_e * inv) << " " << fmt(acc.l1_e * inv) << " "
            << fmt(acc.res * inv) << " " << fmt(acc.sim * inv) << "\n";

        backward(total);
        tracker.params().sgd_step(tc.lr, tc.momentum);
        snapshot = tracker.params().snapshot_values();
        have_params = true;
        res.losses.push_back(lt);
        res.steps_done = step;
    }

    const int n = static_cast<int>(res.losses.size());
    auto window_avg = [&](int lo, int hi) {  // [lo, hi) clamped
        lo = std::max(0, lo);
        hi = std::min(n, hi);
        if (hi <= lo) return 0.0;
        double s = 0;
        for (int t = lo; t < hi; ++t) s += res.losses[t];
        return s / (hi - lo);
    };
    res.first_window_avg = window_avg(0, 10);
    res.last_window_avg = window_avg(n - 10, n);

    tracker.params().save((fs::path(out_dir) / "checkpoint.bin").string());
    return res;
}

Metrics score_tracks(const std::vector<Sequence>& data,
                     const std::vector<std::vector<Box>>& tracks, double precision_px) {
    if (tracks.size() != data.size())
        throw std::invalid_argument("score_tracks: track/sequence count mismatch");
    std::vector<double> ious;
    int hits = 0, frames = 0;
    for (size_t s = 0; s < data.size(); ++s) {
        const auto& gt = data[s].gt;
        if (tracks[s].size() != gt.size() - 1)
            throw std::invalid_argument("score_tracks: track length must be frames-1");
        for (size_t k = 1; k < gt.size(); ++k) {
            const Box& p = tracks[s][k - 1];
            ious.push_back(iou_boxes(p, gt[k]));
            double dx = p.cx() - gt[k].cx(), dy = p.cy() - gt[k].cy();
            if (std::sqrt(dx * dx + dy * dy) <= precision_px) ++hits;
            ++frames;
        }
    }
    Metrics m;
    m.frames = frames;
    if (frames == 0) return m;
    double auc = 0.0;
    for (int t = 0; t <= 20; ++t) {
        const double th = t * 0.05;
        int ok = 0;
        for (double v : ious)
            if (v >= th) ++ok;
        auc += static_cast<double>(ok) / frames;
    }
    m.auc = auc / 21.0;
    m.pr = static_cast<double>(hits) / frames;
    return m;
}

std::vector<std::vector<Box>> static_tracks(const std::vector<Sequence>& data) {
    std::vector<std::vector<Box>> out;
    for (const auto& s : data)
        out.emplace_back(s.gt.size() - 1, s.gt[0]);
    return out;
}

EvalResult evaluate(Tracker& tracker, const std::vector<Sequence>& data, const EvalConfig& ec,
                    const std::string& out_dir) {
    const ModelConfig& mc = tracker.config();
    EvalResult res;
    for (const auto& seq : data) {
        const int L = static_cast<int>(seq.gt.size());
        const int W = seq.frames[0].width, H = seq.frames[0].height;
        const Box& init = seq.gt[0];

        double tside = box_side(init, ec.template_factor);
        Tensor z1f =
            crop_frame_patch(seq.frames[0], init.cx(), init.cy(), tside, mc.template_size);
        Tensor z1e = crop_event_patch(seq.events, seq.frame_time_us(-1), seq.frame_time_us(0),
                                      mc.event_bins, init.cx(), init.cy(), tside,
                                      mc.template_size);

        std::vector<Box> track;
        std::vector<double> scores;
        Box prev = init;
        for (int k = 1; k < L; ++k) {
            SampleInput s;
            s.z1_frame = z1f;
            s.z2_frame = z1f;
            s.z1_event = z1e;
            s.z2_event = z1e;
            // A window larger than the image only adds padding; capping it
            // keeps the response grid usable for re-acquisition after a miss.
            const double side =
                std::min(box_side(prev, ec.search_factor), static_cast<double>(std::min(W, H)));
            s.x_frame = crop_frame_patch(seq.frames[k], prev.cx(), prev.cy(), side,
                                         mc.search_size);
            s.x_event = crop_event_patch(seq.events, seq.frame_time_us(k - 1),
                                         seq.frame_time_us(k), mc.event_bins, prev.cx(),
                                         prev.cy(), side, mc.search_size);
            DecodedBox d = tracker.infer(s);

            CropWindow cw = crop_window(prev.cx(), prev.cy(), side);
            double cx = cw.x0 + d.cx * cw.side;
            double cy = cw.y0 + d.cy * cw.side;
            // Motion gate: a peak far from the previous center is a distractor
            // or noise more often than a real jump, and one teleported window
            // never re-acquires. Cap the per-frame displacement.
            const double step_cap = 0.08 * cw.side;
            const double dx = cx - prev.cx(), dy = cy - prev.cy();
            const double dist = std::hypot(dx, dy);
            if (dist > step_cap) {
                cx = prev.cx() + dx * step_cap / dist;
                cy = prev.cy() + dy * step_cap / dist;
            }
            cx = std::min(std::max(cx, 0.0), static_cast<double>(W));
            cy = std::min(std::max(cy, 0.0), static_cast<double>(H));
            // Damped scale update: single-frame size estimates are noisy and
            // feed back into the next window, so blend them in slowly.
            const double rw = std::min(std::max(d.w * cw.side, 4.0), static_cast<double>(W));
            const double rh = std::min(std::max(d.h * cw.side, 4.0), static_cast<double>(H));
            const double bw = 0.85 * prev.w + 0.15 * rw;
            const double bh = 0.85 * prev.h + 0.15 * rh;
            prev = Box{cx - bw / 2, cy - bh / 2, bw, bh};
            track.push_back(prev);
            scores.push_back(d.score);
        }
        res.tracks.push_back(std::move(track));
        res.scores.push_back(std::move(scores));
    }
    res.metrics = score_tracks(data, res.tracks, ec.precision_px);

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        for (size_t s = 0; s < data.size(); ++s) {
            const int W = data[s].frames[0].width, H = data[s].frames[0].height;
            std::ofstream os(fs::path(out_dir) /
                             ("track_" + fs::path(data[s].dir).filename().string() + ".txt"));
            for (size_t k = 0; k < res.tracks[s].size(); ++k) {
                const Box& b = res.tracks[s][k];
                os << (k + 1) << " " << fmt(b.cx() / W) << " " << fmt(b.cy() / H) << " "
                   << fmt(b.w / W) << " " << fmt(b.h / H) << " " << fmt(res.scores[s][k]) << "\n";
            }
        }
        std::ofstream ms(fs::path(out_dir) / "metrics.txt");
        ms << "auc=" << fmt(res.metrics.auc) << "\n";
        ms << "pr=" << fmt(res.metrics.pr) << "\n";
        ms << "frames=" << res.metrics.frames << "\n";
    }
    return res;
}

namespace {

void draw_rect(Image& img, const Box& b, uint8_t value) {
    int x0 = std::max(0, static_cast<int>(std::lround(b.x)));
    int y0 = std::max(0, static_cast<int>(std::lround(b.y)));
    int x1 = std::min(img.width - 1, static_cast<int>(std::lround(b.x + b.w)));
    int y1 = std::min(img.height - 1, static_cast<int>(std::lround(b.y + b.h)));
    for (int x = x0; x <= x1; ++x) {
        img.at(y0, x) = value;
        img.at(y1, x) = value;
    }
    for (int y = y0; y <= y1; ++y) {
        img.at(y, x0) = value;
        img.at(y, x1) = value;
    }
}

}  // namespace

void render_demo(const Sequence& seq, const std::vector<Box>& track, const std::string& out_dir) {
    if (track.size() + 1 != seq.frames.size())
        throw std::invalid_argument("render_demo: track length must be frames-1");
    fs::create_directories(out_dir);
    for (size_t k = 0; k < seq.frames.size(); ++k) {
        Image img = seq.frames[k];
        draw_rect(img, k == 0 ? seq.gt[0] : track[k - 1], 255);
        char name[32];
        std::snprintf(name, sizeof(name), "demo_%06zu.png", k);
        png_write((fs::path(out_dir) / name).string(), img);
    }
}

SampleInput sample_from_sequence(const Sequence& seq, int frame, const ModelConfig& mc,
                                 const EvalConfig& ec) {
    if (frame < 1 || frame >= static_cast<int>(seq.gt.size()))
        throw std::invalid_argument("sample_from_sequence: frame out of range");
    const Box& init = seq.gt[0];
    const Box& cur = seq.gt[frame];
    SampleInput s;
    double tside = box_side(init, ec.template_factor);
    s.z1_frame = crop_frame_patch(seq.frames[0], init.cx(), init.cy(), tside, mc.template_size);
    s.z1_event = crop_event_patch(seq.events, seq.frame_time_us(-1), seq.frame_time_us(0),
                                  mc.event_bins, init.cx(), init.cy(), tside, mc.template_size);
    s.z2_frame = s.z1_frame;
    s.z2_event = s.z1_event;
    double side = box_side(cur, ec.search_factor);
    s.x_frame = crop_frame_patch(seq.frames[frame], cur.cx(), cur.cy(), side, mc.search_size);
    s.x_event = crop_event_patch(seq.events, seq.frame_time_us(frame - 1),
                                 seq.frame_time_us(frame), mc.event_bins, cur.cx(), cur.cy(),
                                 side, mc.search_size);
    return s;
}

}  // namespace spikefet
