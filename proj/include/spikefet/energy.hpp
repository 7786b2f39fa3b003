#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spikefet {

// One synaptic layer's operation count. Layers fed by analog values (the
// stems) cost multiply-accumulates; layers fed by spikes cost accumulates
// proportional to the mean input spike count.
struct LayerOpCount {
    std::string name;
    double flops = 0.0;        // dense MAC count of the layer
    bool analog_input = false;
    double firing_rate = 0.0;  // mean spikes per input position (spike layers)
    int d_max = 4;
};

struct EnergyCosts {
    double e_mac_pj = 4.6;  // 45 nm full MAC
    double e_ac_pj = 0.9;   // 45 nm accumulate
};

// Forward-pass recorder. Layer wrappers append op counts; sn() wrappers
// append observed firing rates.
class EnergyTrace {
   public:
    void add_analog(const std::string& name, double flops);
    void add_spike(const std::string& name, double flops, double rate, int d_max);
    void add_rate(const std::string& name, double rate);
    void clear();

    const std::vector<LayerOpCount>& items() const { return items_; }
    const std::vector<std::pair<std::string, double>>& rates() const { return rates_; }

   private:
    std::vector<LayerOpCount> items_;
    std::vector<std::pair<std::string, double>> rates_;
};

struct EnergyLine {
    std::string name;
    bool analog_input = false;
    double flops = 0.0;
    double firing_rate = 0.0;
    double energy_pj = 0.0;
};

struct EnergyReport {
    std::vector<EnergyLine> lines;
    double mac_ops = 0.0;      // dense MACs on analog inputs
    double ac_ops = 0.0;       // effective accumulates (flops * rate)
    double mac_energy_pj = 0.0;
    double ac_energy_pj = 0.0;
    double total_pj = 0.0;
    double total_mj = 0.0;
};

// Totals are accumulated over a canonically sorted copy of the entries, so
// they are invariant under permutation of the trace.
EnergyReport estimate(const std::vector<LayerOpCount>& counts, const EnergyCosts& costs);

void write_report_text(std::ostream& os, const EnergyReport& r);
void write_report_kv(std::ostream& os, const EnergyReport& r);

}  // namespace spikefet
