#pragma once

#include <vector>

#include "spikefet/autograd.hpp"
#include "spikefet/tensor.hpp"

namespace spikefet {

// Integer spike count of a membrane value: clamp(round(x), 0, d_max).
double sn_count(double x, int d_max);

// Elementwise spike counts of a tensor.
Tensor sn_forward(const Tensor& x, const SpikeNeuronConfig& cfg);

// Unrolls a count tensor into d_max binary micro-step tensors. A neuron with
// count k emits k ones followed by d_max - k zeros.
std::vector<Tensor> unroll_to_binary(const Tensor& counts, const SpikeNeuronConfig& cfg);

// Sums micro-step binaries back into counts (inverse of unroll_to_binary).
Tensor sum_binary(const std::vector<Tensor>& steps);

// Mean spikes emitted per neuron (mean of the count tensor).
double firing_rate(const Tensor& counts);

}  // namespace spikefet
