#include "spikefet/spike.hpp"

#include <cmath>
#include <stdexcept>

namespace spikefet {

double sn_count(double x, int d_max) {
    double r = std::round(x);
    if (r < 0.0) return 0.0;
    if (r > d_max) return static_cast<double>(d_max);
    return r;
}

Tensor sn_forward(const Tensor& x, const SpikeNeuronConfig& cfg) {
    Tensor out = x;
    for (int i = 0; i < out.numel(); ++i) out[i] = sn_count(out[i], cfg.d_max);
    return out;
}

std::vector<Tensor> unroll_to_binary(const Tensor& counts, const SpikeNeuronConfig& cfg) {
    std::vector<Tensor> steps;
    steps.reserve(cfg.d_max);
    for (int s = 0; s < cfg.d_max; ++s) {
        Tensor b(counts.shape());
        for (int i = 0; i < counts.numel(); ++i) {
            double k = counts[i];
            if (k != std::floor(k) || k < 0.0 || k > cfg.d_max)
                throw std::invalid_argument("unroll_to_binary: counts must be integers in [0, D]");
            b[i] = s < static_cast<int>(k) ? 1.0 : 0.0;
        }
        steps.push_back(std::move(b));
    }
    return steps;
}

Tensor sum_binary(const std::vector<Tensor>& steps) {
    if (steps.empty()) throw std::invalid_argument("sum_binary: no steps");
    Tensor out = Tensor::zeros(steps[0].shape());
    for (const auto& s : steps) out.add_inplace(s);
    return out;
}

double firing_rate(const Tensor& counts) { return counts.mean(); }

}  // namespace spikefet
