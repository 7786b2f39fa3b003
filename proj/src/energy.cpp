#include "spikefet/energy.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <stdexcept>

namespace spikefet {

void EnergyTrace::add_analog(const std::string& name, double flops) {
    items_.push_back({name, flops, true, 0.0, 0});
}

void EnergyTrace::add_spike(const std::string& name, double flops, double rate, int d_max) {
    items_.push_back({name, flops, false, rate, d_max});
}

void EnergyTrace::add_rate(const std::string& name, double rate) {
    rates_.push_back({name, rate});
}

void EnergyTrace::clear() {
    items_.clear();
    rates_.clear();
}

EnergyReport estimate(const std::vector<LayerOpCount>& counts, const EnergyCosts& costs) {
    for (const auto& c : counts) {
        if (c.flops < 0.0) throw std::invalid_argument("energy: negative flops for " + c.name);
        if (!c.analog_input && (c.firing_rate < 0.0 || c.firing_rate > c.d_max))
            throw std::invalid_argument("energy: firing rate outside [0, D] for " + c.name);
    }
    std::vector<LayerOpCount> sorted = counts;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const LayerOpCount& a, const LayerOpCount& b) {
                         if (a.name != b.name) return a.name < b.name;
                         if (a.analog_input != b.analog_input) return a.analog_input;
                         if (a.flops != b.flops) return a.flops < b.flops;
                         return a.firing_rate < b.firing_rate;
                     });
    EnergyReport r;
    for (const auto& c : sorted) {
        EnergyLine l;
        l.name = c.name;
        l.analog_input = c.analog_input;
        l.flops = c.flops;
        l.firing_rate = c.firing_rate;
        if (c.analog_input) {
            l.energy_pj = c.flops * costs.e_mac_pj;
            r.mac_ops += c.flops;
            r.mac_energy_pj += l.energy_pj;
        } else {
            l.energy_pj = c.flops * c.firing_rate * costs.e_ac_pj;
            r.ac_ops += c.flops * c.firing_rate;
            r.ac_energy_pj += l.energy_pj;
        }
        r.lines.push_back(std::move(l));
    }
    r.total_pj = r.mac_energy_pj + r.ac_energy_pj;
    r.total_mj = r.total_pj * 1e-9;
    return r;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_report_text(std::ostream& os, const EnergyReport& r) {
    size_t name_w = 5;
    for (const auto& l : r.lines) name_w = std::max(name_w, l.name.size());
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << "layer" << std::setw(6)
       << "kind" << std::right << std::setw(16) << "flops" << std::setw(14) << "rate"
       << std::setw(20) << "energy_pj" << "\n";
    for (const auto& l : r.lines) {
        char flops[32], rate[32], e[32];
        std::snprintf(flops, sizeof(flops), "%.0f", l.flops);
        std::snprintf(rate, sizeof(rate), "%.6f", l.firing_rate);
        std::snprintf(e, sizeof(e), "%.4f", l.energy_pj);
        os << std::left << std::setw(static_cast<int>(name_w) + 2) << l.name << std::setw(6)
           << (l.analog_input ? "mac" : "ac") << std::right << std::setw(16) << flops
           << std::setw(14) << (l.analog_input ? "-" : rate) << std::setw(20) << e << "\n";
    }
    os << "mac_ops " << fmt(r.mac_ops) << "  ac_ops " << fmt(r.ac_ops) << "\n";
    os << "total " << fmt(r.total_pj) << " pJ (" << fmt(r.total_mj) << " mJ)\n";
}

void write_report_kv(std::ostream& os, const EnergyReport& r) {
    os << "mac_ops=" << fmt(r.mac_ops) << "\n";
    os << "ac_ops=" << fmt(r.ac_ops) << "\n";
    os << "mac_energy_pj=" << fmt(r.mac_energy_pj) << "\n";
    os << "ac_energy_pj=" << fmt(r.ac_energy_pj) << "\n";
    os << "total_energy_pj=" << fmt(r.total_pj) << "\n";
    os << "total_energy_mj=" << fmt(r.total_mj) << "\n";
    os << "layers=" << r.lines.size() << "\n";
    for (size_t i = 0; i < r.lines.size(); ++i) {
        const auto& l = r.lines[i];
        os << "layer" << i << ".name=" << l.name << "\n";
        os << "layer" << i << ".kind=" << (l.analog_input ? "mac" : "ac") << "\n";
        os << "layer" << i << ".flops=" << fmt(l.flops) << "\n";
        os << "layer" << i << ".rate=" << fmt(l.firing_rate) << "\n";
        os << "layer" << i << ".energy_pj=" << fmt(l.energy_pj) << "\n";
    }
}

}  // namespace spikefet
