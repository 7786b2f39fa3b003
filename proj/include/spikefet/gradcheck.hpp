#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spikefet/autograd.hpp"

namespace spikefet {

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
    int skipped = 0;  // elements sitting on a kink of a piecewise op
    std::string worst;  // "leaf#k[i] analytic=.. numeric=.."
};

// Compares reverse-mode gradients against central differences.
// `fn` must rebuild the graph from the leaf values on every call and return a
// scalar. Relative error is |analytic - numeric| / max(1, |numeric|).
// Elements whose left and right one-sided slopes disagree (the perturbation
// straddles a kink, where only a one-sided derivative exists) are skipped and
// counted in `skipped`. `stride` > 1 checks every stride-th element.
GradCheckResult grad_check(const std::vector<Var>& leaves, const std::function<Var()>& fn,
                           double eps = 1e-3, int stride = 1);

}  // namespace spikefet
