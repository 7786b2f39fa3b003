// Acceptance gate: one PASS/FAIL line per release criterion, nonzero exit if
// any criterion fails. Criteria 7 and 8 run the full desk-scale protocol
// (data generation, training, evaluation), so this binary takes several
// minutes; everything is seeded and deterministic.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "grad_suite.hpp"
#include "spikefet/config.hpp"
#include "spikefet/energy.hpp"
#include "spikefet/harness.hpp"
#include "spikefet/head.hpp"
#include "spikefet/losses.hpp"
#include "spikefet/patchwork.hpp"
#include "spikefet/spike.hpp"
#include "spikefet/tracker.hpp"

using namespace spikefet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& why) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += why;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

// ---- criterion 1: gradient suite --------------------------------------

Check criterion_gradients() {
    Check c;
    const auto t0 = Clock::now();
    auto entries = testing::run_grad_suite();
    const double secs = seconds_since(t0);
    double worst = 0.0;
    std::string worst_name = "-";
    for (const auto& e : entries) {
        if (e.res.max_rel_err > worst) {
            worst = e.res.max_rel_err;
            worst_name = e.name;
        }
        if (e.res.max_rel_err > 1e-4)
            c.require(false, e.name + " rel err " + fmt3(e.res.max_rel_err));
    }
    c.require(entries.size() >= 60, "only " + std::to_string(entries.size()) + " checks");
    c.require(secs < 120.0, "took " + fmt3(secs) + " s");
    c.note(std::to_string(entries.size()) + " checks, worst " + worst_name + " " +
           fmt3(worst / 1e-4) + "e-4, " + fmt3(secs) + " s");
    return c;
}

// ---- criterion 2: spike round trips ------------------------------------

Check criterion_spikes() {
    Check c;
    const auto t0 = Clock::now();
    Rng rng(20240815);
    SpikeNeuronConfig sn;
    long values = 0;
    for (int iter = 0; iter < 500 && c.ok; ++iter) {
        Tensor x({200});
        for (int i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-2.0, 6.0);
        Tensor counts = sn_forward(x, sn);
        double total = 0.0;
        for (int i = 0; i < counts.numel(); ++i) {
            const double v = counts[i];
            c.require(v == std::floor(v), "non-integer count");
            c.require(v >= 0.0 && v <= sn.d_max, "count out of [0,D]");
            total += v;
        }
        auto steps = unroll_to_binary(counts, sn);
        c.require(static_cast<int>(steps.size()) == sn.d_max, "wrong step count");
        for (int i = 0; i < counts.numel(); ++i) {
            bool seen_zero = false;
            for (const auto& s : steps) {
                const double b = s[i];
                c.require(b == 0.0 || b == 1.0, "non-binary step");
                if (b == 0.0) seen_zero = true;
                if (b == 1.0) c.require(!seen_zero, "ones after zeros");
            }
        }
        Tensor back = sum_binary(steps);
        for (int i = 0; i < counts.numel(); ++i)
            c.require(back[i] == counts[i], "sum_binary mismatch");
        c.require(firing_rate(counts) == total / counts.numel(), "firing rate mismatch");
        values += counts.numel();
    }
    const double secs = seconds_since(t0);
    c.require(values >= 100000, "too few round trips");
    c.require(secs < 10.0, "took " + fmt3(secs) + " s");
    c.note(std::to_string(values) + " round trips, " + fmt3(secs) + " s");
    return c;
}

// ---- criterion 3: patchwork geometry -----------------------------------

Check criterion_patchwork() {
    Check c;
    const auto t0 = Clock::now();
    const PatchArrangement all[] = {PatchArrangement::search_right, PatchArrangement::search_left,
                                    PatchArrangement::search_bottom, PatchArrangement::search_top};
    Rng rng(99);
    const int stride = 4;
    for (int rep = 0; rep < 20 && c.ok; ++rep) {
        const int hz = stride * (2 + static_cast<int>(rng.below(3)));
        const int hx = 2 * hz;
        for (PatchArrangement a : all) {
            PatchLayout l = plan_patchwork(a, hz, hz, hx, hx);
            // Exact tiling: areas account for the whole canvas and the three
            // rectangles stay inside it and never overlap.
            const long canvas = static_cast<long>(l.canvas_h) * l.canvas_w;
            const long tiles = static_cast<long>(l.z1.w) * l.z1.h +
                               static_cast<long>(l.z2.w) * l.z2.h +
                               static_cast<long>(l.x.w) * l.x.h;
            c.require(canvas == tiles, "tiling not exact");
            const Rect* rects[] = {&l.z1, &l.z2, &l.x};
            for (const Rect* r : rects) {
                c.require(r->x >= 0 && r->y >= 0 && r->x + r->w <= l.canvas_w &&
                              r->y + r->h <= l.canvas_h,
                          "patch out of bounds");
            }
            for (int i = 0; i < 3; ++i)
                for (int j = i + 1; j < 3; ++j) {
                    const Rect &p = *rects[i], &q = *rects[j];
                    const bool overlap = p.x < q.x + q.w && q.x < p.x + p.w &&
                                         p.y < q.y + q.h && q.y < p.y + p.h;
                    c.require(!overlap, "patches overlap");
                }
            // Type map area accounting at the feature stride.
            auto ids = type_map(l, stride);
            long n0 = 0, n1 = 0, n2 = 0;
            for (int id : ids) (id == 0 ? n0 : id == 1 ? n1 : n2)++;
            const long cz = static_cast<long>(hz / stride) * (hz / stride);
            c.require(n0 == cz && n1 == cz && n2 == 4 * cz, "type map areas wrong");

            // Cross-modal layout equality + split/reassemble identity: two
            // modalities with different channel counts share one plan; the
            // split features must equal the original patches exactly.
            for (int ch : {1, 3}) {
                auto make = [&](double base, int h, int w) {
                    Tensor t({1, ch, h / stride, w / stride});
                    for (int i = 0; i < t.numel(); ++i) t[i] = base + i;
                    return t;
                };
                PatchLayout fl = plan_patchwork(a, hz / stride, hz / stride, hx / stride,
                                                hx / stride);
                Tensor z1 = make(1000, hz, hz), z2 = make(2000, hz, hz), x = make(3000, hx, hx);
                Tensor canvas_t = assemble_canvas(fl, z1, z2, x);
                SplitFeatures sf = split_features(Var::leaf(canvas_t), fl, 1);
                auto same = [](const Tensor& a_, const Tensor& b_) {
                    if (a_.shape() != b_.shape()) return false;
                    for (int i = 0; i < a_.numel(); ++i)
                        if (a_[i] != b_[i]) return false;
                    return true;
                };
                c.require(same(sf.z1.value(), z1) && same(sf.z2.value(), z2) &&
                              same(sf.x.value(), x),
                          "split/reassemble not identity");
            }
        }
    }
    const double secs = seconds_since(t0);
    c.require(secs < 10.0, "took " + fmt3(secs) + " s");
    c.note("4 layouts x 20 seeds, " + fmt3(secs) + " s");
    return c;
}

// ---- criterion 4: loss identities ---------------------------------------

Check criterion_losses() {
    Check c;
    // Composite with every component equal to 1 under the published weights.
    LossWeights w;
    const double composite = (1.0 + w.lambda_iou * 1.0 + w.lambda_l1 * 1.0) * 2.0 +
                             w.alpha * 1.0 + w.beta * 1.0;
    c.require(composite == 17.5, "unit composite != 17.5");

    // GIoU hand case: unit boxes at (0,0) and (2,2) centers.
    Var pred = Var::leaf(Tensor({4}, {0.0, 0.0, 1.0, 1.0}), true);
    Tensor gt({4}, {2.0, 2.0, 1.0, 1.0});
    const double g = giou_loss(pred, gt).value()[0];
    c.require(std::abs(g - (1.0 + 7.0 / 9.0)) <= 1e-9, "giou corner case");
    c.require(std::abs(g - 1.7778) <= 1e-4, "giou != 1.7778");

    // STR: zero at equality (with zero gradient), symmetric, positive apart.
    Rng rng(5);
    Tensor f({1, 4, 3, 3}), h({1, 4, 3, 3});
    for (int i = 0; i < f.numel(); ++i) {
        f[i] = rng.uniform(-1.0, 1.0);
        h[i] = rng.uniform(-1.0, 1.0);
    }
    Var vf = Var::leaf(f, true), vh = Var::leaf(h, true);
    Var zero = str_loss(vf, vf);
    c.require(zero.value()[0] == 0.0, "str(f,f) != 0");
    backward(zero);
    double gmax = 0.0;
    for (int i = 0; i < vf.grad().numel(); ++i) gmax = std::max(gmax, std::abs(vf.grad()[i]));
    c.require(gmax == 0.0, "str gradient at equality not zero");
    const double ab = str_loss(vf, vh).value()[0];
    const double ba = str_loss(vh, vf).value()[0];
    c.require(ab == ba, "str not symmetric");
    c.require(ab > 0.0, "str not positive apart");
    c.note("composite 17.5, giou " + fmt3(g) + ", str ok");
    return c;
}

// ---- criterion 5: fusion and attention ----------------------------------

Check criterion_fusion() {
    Check c;
    Rng rng(17);
    Tensor rf({1, 1, 4, 4}), re({1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) {
        rf[i] = rng.uniform(0.0, 1.0);
        re[i] = rng.uniform(0.0, 1.0);
    }
    Tensor at0 = fuse_responses(rf, re, 0.0);
    Tensor at1 = fuse_responses(rf, re, 1.0);
    Tensor mid = fuse_responses(rf, re, 0.5);
    for (int i = 0; i < 16; ++i) {
        c.require(at0[i] == re[i] && at1[i] == rf[i], "fusion endpoints not exact");
        c.require(mid[i] == 0.5 * rf[i] + 0.5 * re[i], "fusion midpoint not exact");
    }

    // All-ones single-stripe SSA: every pre-activation is n * d_head * scale.
    const int C = 8, heads = 2, gh = 2, gw = 2, N = 2 * gh * gw;
    StripePlan plan = build_stripes(gh, gw, gh, heads);
    Tensor ones({N, C});
    for (int i = 0; i < ones.numel(); ++i) ones[i] = 1.0;
    Var q = Var::leaf(ones), k = Var::leaf(ones), v = Var::leaf(ones);
    const double scale = 1.0 / 64.0;
    SpikeNeuronConfig sncfg;
    Var smooth = stripe_ssa(q, k, v, plan, scale, sncfg, SpikeMode::smooth);
    const double want = N * (C / heads) * scale;  // 8 * 4 / 64 per covered token
    for (int i = 0; i < smooth.value().numel(); ++i)
        c.require(smooth.value()[i] == want, "closed form mismatch");

    // Hard mode on integer inputs stays integer and bounded by D.
    Tensor qi({N, C}), ki({N, C}), vi({N, C});
    for (int i = 0; i < qi.numel(); ++i) {
        qi[i] = static_cast<double>(rng.below(sncfg.d_max + 1));
        ki[i] = static_cast<double>(rng.below(sncfg.d_max + 1));
        vi[i] = static_cast<double>(rng.below(sncfg.d_max + 1));
    }
    Var hard = stripe_ssa(Var::leaf(qi), Var::leaf(ki), Var::leaf(vi), plan,
                          1.0 / (2.0 * sncfg.d_max), sncfg, SpikeMode::hard);
    for (int i = 0; i < hard.value().numel(); ++i) {
        const double x = hard.value()[i];
        c.require(x == std::floor(x) && x >= 0.0 && x <= sncfg.d_max,
                  "post-SN value not an integer in [0,D]");
    }
    c.note("endpoints exact, closed form " + fmt3(want) + ", hard bounded");
    return c;
}

// ---- criterion 6: energy model ------------------------------------------

Check criterion_energy() {
    Check c;
    EnergyCosts costs;  // 4.6 / 0.9 pJ
    std::vector<LayerOpCount> one{{"layer", 1000.0, false, 0.2, 4}};
    EnergyReport hand = estimate(one, costs);
    c.require(hand.total_pj == 180.0, "hand case != 180 pJ");

    std::vector<LayerOpCount> quiet{{"stem", 500.0, true, 0.0, 4},
                                    {"body", 4000.0, false, 0.0, 4}};
    EnergyReport zr = estimate(quiet, costs);
    c.require(zr.total_pj == 500.0 * costs.e_mac_pj, "zero-spike limit not exact");

    Rng rng(31);
    for (int rep = 0; rep < 100 && c.ok; ++rep) {
        std::vector<LayerOpCount> base, twice;
        const int n = 3 + static_cast<int>(rng.below(10));
        for (int i = 0; i < n; ++i) {
            LayerOpCount item{"l" + std::to_string(i), 10.0 + rng.uniform(0.0, 500.0),
                              i == 0, rng.uniform(0.0, 2.0), 4};
            base.push_back(item);
            item.firing_rate *= 2.0;
            twice.push_back(item);
        }
        EnergyReport r1 = estimate(base, costs);
        EnergyReport r2 = estimate(twice, costs);
        c.require(std::abs(r2.ac_energy_pj - 2.0 * r1.ac_energy_pj) <=
                      1e-12 * std::max(1.0, r1.ac_energy_pj),
                  "not linear in rate");
        c.require(r2.mac_energy_pj == r1.mac_energy_pj, "analog cost changed with rate");
        std::ostringstream a, b;
        write_report_kv(a, estimate(base, costs));
        write_report_kv(b, estimate(base, costs));
        c.require(a.str() == b.str(), "rerun not bit-identical");
    }
    c.note("180 pJ, zero-rate, 100 linearity traces");
    return c;
}

// ---- criteria 7/8: desk-scale learning + ablations ----------------------

struct Protocol {
    fs::path root = "/tmp/spikefet_acceptance";
    std::vector<Sequence> train_data, eval_data;
    double auc_static = 0.0;

    void prepare() {
        fs::remove_all(root);
        DataConfig train_cfg;  // 8 sequences, defaults
        gen_dataset((root / "train_data").string(), train_cfg, 1001);
        DataConfig eval_cfg;
        eval_cfg.sequences = 4;
        gen_dataset((root / "eval_data").string(), eval_cfg, 2002);
        for (const auto& p : list_sequences((root / "train_data").string()))
            train_data.push_back(load_sequence(p, train_cfg.frame_interval_us));
        for (const auto& p : list_sequences((root / "eval_data").string()))
            eval_data.push_back(load_sequence(p, eval_cfg.frame_interval_us));
        auc_static = score_tracks(eval_data, static_tracks(eval_data), 20.0).auc;
    }

    struct Run {
        TrainResult train;
        double auc = 0.0;
    };

    Run run_variant(const std::string& tag, bool use_rpm, bool use_str) {
        ModelConfig mc;
        mc.use_rpm = use_rpm;
        mc.use_str = use_str;
        Tracker tracker(mc, 1);
        Run r;
        TrainConfig tc;  // 200 steps, defaults
        r.train = train(tracker, train_data, tc, 1, (root / ("train_" + tag)).string());
        r.auc = evaluate(tracker, eval_data, EvalConfig{}, (root / ("eval_" + tag)).string())
                    .metrics.auc;
        return r;
    }
};

Check criterion_learning(Protocol& proto, double* full_auc_out) {
    Check c;
    const auto t0 = Clock::now();
    proto.prepare();

    Protocol::Run full = proto.run_variant("full", true, true);
    c.require(!full.train.diverged, "training diverged");
    const double drop =
        (full.train.first_window_avg - full.train.last_window_avg) / full.train.first_window_avg;
    c.require(drop >= 0.30, "loss drop " + fmt3(drop) + " < 0.30");

    ModelConfig mc;
    Tracker untrained(mc, 1);
    const double auc_untrained =
        evaluate(untrained, proto.eval_data, EvalConfig{}, (proto.root / "eval_untrained").string())
            .metrics.auc;

    c.require(full.auc >= proto.auc_static + 0.10,
              "trained " + fmt3(full.auc) + " vs static " + fmt3(proto.auc_static));
    c.require(full.auc >= auc_untrained + 0.10,
              "trained " + fmt3(full.auc) + " vs untrained " + fmt3(auc_untrained));
    const double secs = seconds_since(t0);
    c.require(secs < 900.0, "took " + fmt3(secs) + " s");
    c.note("loss drop " + fmt3(drop) + ", auc " + fmt3(full.auc) + " (static " +
           fmt3(proto.auc_static) + ", untrained " + fmt3(auc_untrained) + "), " + fmt3(secs) +
           " s");
    *full_auc_out = full.auc;
    return c;
}

Check criterion_ablations(Protocol& proto, double full_auc) {
    Check c;
    if (proto.eval_data.empty()) {
        c.require(false, "protocol data unavailable");
        return c;
    }
    Protocol::Run no_rpm = proto.run_variant("norpm", false, true);
    Protocol::Run no_str = proto.run_variant("nostr", true, false);
    c.require(full_auc >= no_rpm.auc, "full " + fmt3(full_auc) + " < no-RPM " + fmt3(no_rpm.auc));
    c.require(full_auc >= no_str.auc, "full " + fmt3(full_auc) + " < no-STR " + fmt3(no_str.auc));
    c.note("deltas: RPM +" + fmt3(full_auc - no_rpm.auc) + ", STR +" +
           fmt3(full_auc - no_str.auc));
    return c;
}

// ---- criterion 9: determinism -------------------------------------------

Check criterion_determinism() {
    Check c;
    const fs::path root = "/tmp/spikefet_acceptance_det";
    fs::remove_all(root);
    DataConfig d;
    d.sequences = 2;
    d.length = 10;
    d.canvas = 96;
    d.min_size = 14;
    d.max_size = 20;
    gen_dataset((root / "data_a").string(), d, 4242);
    gen_dataset((root / "data_b").string(), d, 4242);

    ModelConfig mc;
    mc.plan.depths = {1, 1, 1};
    mc.plan.channels = {8, 16, 32};
    mc.event_bins = 2;
    mc.template_size = 32;
    mc.search_size = 64;

    auto run = [&](const fs::path& data_dir, const fs::path& out) {
        std::vector<Sequence> data;
        for (const auto& p : list_sequences(data_dir.string()))
            data.push_back(load_sequence(p, d.frame_interval_us));
        Tracker tracker(mc, 5);
        TrainConfig tc;
        tc.steps = 12;
        train(tracker, data, tc, 3, out.string());
        evaluate(tracker, data, EvalConfig{}, out.string());
    };
    run(root / "data_a", root / "run_a");
    run(root / "data_b", root / "run_b");

    for (const char* f : {"train_log.txt", "checkpoint.bin", "metrics.txt"}) {
        const std::string a = slurp(root / "run_a" / f), b = slurp(root / "run_b" / f);
        c.require(!a.empty(), std::string(f) + " missing");
        c.require(a == b, std::string(f) + " differs between runs");
    }
    c.note("logs, checkpoint, metrics bit-identical");
    fs::remove_all(root);
    return c;
}

}  // namespace

int main() {
    struct Row {
        int id;
        const char* name;
        std::function<Check()> fn;
    };
    Protocol proto;
    double full_auc = 0.0;
    const std::vector<Row> rows = {
        {1, "gradient suite <= 1e-4", criterion_gradients},
        {2, "spike round trips exact", criterion_spikes},
        {3, "patchwork geometry", criterion_patchwork},
        {4, "loss identities (17.5 / giou / str)", criterion_losses},
        {5, "response fusion + stripe attention", criterion_fusion},
        {6, "energy model", criterion_energy},
        {7, "desk-scale learning", [&] { return criterion_learning(proto, &full_auc); }},
        {8, "ablation non-inferiority", [&] { return criterion_ablations(proto, full_auc); }},
        {9, "bit-exact determinism", criterion_determinism},
    };

    bool all_ok = true;
    for (const auto& row : rows) {
        Check c;
        try {
            c = row.fn();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        all_ok = all_ok && c.ok;
        std::printf("%s criterion %d: %s%s%s\n", c.ok ? "PASS" : "FAIL", row.id, row.name,
                    c.detail.empty() ? "" : " — ", c.detail.c_str());
        std::fflush(stdout);
    }
    return all_ok ? 0 : 1;
}
