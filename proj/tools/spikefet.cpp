#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spikefet/config.hpp"
#include "spikefet/harness.hpp"

namespace fs = std::filesystem;
using namespace spikefet;

namespace {

std::vector<Sequence> load_data(const std::string& dir, int64_t interval_us) {
    std::vector<Sequence> out;
    for (const auto& d : list_sequences(dir)) out.push_back(load_sequence(d, interval_us));
    return out;
}

void print_metrics(const Metrics& m) {
    std::printf("auc=%.17g\n", m.auc);
    std::printf("pr=%.17g\n", m.pr);
    std::printf("frames=%d\n", m.frames);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spikefet: fully spiking frame+event single-object tracking toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, checkpoint;
    uint64_t seed = 1;
    int sequence = 0;
    int frame = 1;
    double e_mac_pj = 0.0, e_ac_pj = 0.0;

    auto common = [&](CLI::App* c, bool need_out, bool need_data) {
        c->add_option("--config", config_path, "config file ([section] + key = value lines)")
            ->check(CLI::ExistingFile);
        c->add_option("--seed", seed, "seed for all randomness");
        auto* o = c->add_option("--out", out_dir, "output directory");
        if (need_out) o->required();
        if (need_data) c->add_option("--data", data_dir, "dataset directory")->required();
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate synthetic frame+event sequences");
    common(gen, true, false);

    CLI::App* tr = app.add_subcommand("train", "train the tracker on a dataset");
    common(tr, true, true);
    tr->add_option("--checkpoint", checkpoint, "initial checkpoint to fine-tune")
        ->check(CLI::ExistingFile);

    CLI::App* ev = app.add_subcommand("eval", "run the tracker and report AUC/PR");
    common(ev, false, true);
    ev->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")
        ->check(CLI::ExistingFile);

    CLI::App* en = app.add_subcommand("energy", "estimate energy of one inference forward pass");
    common(en, false, true);
    en->add_option("--checkpoint", checkpoint, "checkpoint to profile")
        ->check(CLI::ExistingFile);
    auto* om = en->add_option("--e-mac-pj", e_mac_pj, "energy per multiply-accumulate in pJ");
    auto* oa = en->add_option("--e-ac-pj", e_ac_pj, "energy per accumulate in pJ");
    en->add_option("--sequence", sequence, "sequence index to profile");
    en->add_option("--frame", frame, "frame index to profile");

    CLI::App* de = app.add_subcommand("demo", "render tracked boxes onto frames");
    common(de, true, true);
    de->add_option("--checkpoint", checkpoint, "checkpoint to run")->check(CLI::ExistingFile);
    de->add_option("--sequence", sequence, "sequence index to render");

    CLI11_PARSE(app, argc, argv);

    try {
        AppConfig cfg;
        if (!config_path.empty()) cfg = parse_config(config_path);
        cfg.model.validate();

        if (gen->parsed()) {
            gen_dataset(out_dir, cfg.data, seed);
            std::printf("wrote %d sequences under %s\n", cfg.data.sequences, out_dir.c_str());
            return 0;
        }

        std::vector<Sequence> data = load_data(data_dir, cfg.data.frame_interval_us);
        Tracker tracker(cfg.model, seed);
        if (!checkpoint.empty()) tracker.params().load(checkpoint);

        if (tr->parsed()) {
            TrainResult r = train(tracker, data, cfg.train, seed, out_dir);
            if (r.diverged) {
                std::fprintf(stderr,
                             "error: loss diverged at step %d; kept the last good checkpoint\n",
                             r.steps_done + 1);
                return 2;
            }
            std::printf("steps=%d\n", r.steps_done);
            std::printf("loss_start=%.17g\n", r.first_window_avg);
            std::printf("loss_end=%.17g\n", r.last_window_avg);
        } else if (ev->parsed()) {
            EvalResult r = evaluate(tracker, data, cfg.eval, out_dir);
            print_metrics(r.metrics);
        } else if (en->parsed()) {
            if (om->count()) cfg.energy.e_mac_pj = e_mac_pj;
            if (oa->count()) cfg.energy.e_ac_pj = e_ac_pj;
            if (sequence < 0 || sequence >= static_cast<int>(data.size()))
                throw std::invalid_argument("--sequence out of range");
            SampleInput s = sample_from_sequence(data[sequence], frame, cfg.model, cfg.eval);
            EnergyTrace trace;
            tracker.infer(s, &trace);
            EnergyReport rep = estimate(trace.items(), cfg.energy);
            write_report_text(std::cout, rep);
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                std::ofstream t(fs::path(out_dir) / "energy.txt");
                write_report_text(t, rep);
                std::ofstream k(fs::path(out_dir) / "energy.kv");
                write_report_kv(k, rep);
            }
        } else if (de->parsed()) {
            if (sequence < 0 || sequence >= static_cast<int>(data.size()))
                throw std::invalid_argument("--sequence out of range");
            std::vector<Sequence> one{data[sequence]};
            EvalResult r = evaluate(tracker, one, cfg.eval, "");
            render_demo(one[0], r.tracks[0], out_dir);
            print_metrics(r.metrics);
            std::printf("rendered %zu frames under %s\n", one[0].frames.size(), out_dir.c_str());
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
