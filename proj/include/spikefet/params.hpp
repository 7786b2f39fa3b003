#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "spikefet/autograd.hpp"
#include "spikefet/rng.hpp"
#include "spikefet/tensor.hpp"

namespace spikefet {

// Named parameter registry. Creation order is stable, so runs with the same
// seed and the same network build order are bit-identical. Also owns BN
// running statistics so checkpoints capture them.
class ParamStore {
   public:
    explicit ParamStore(uint64_t init_seed) : rng_(init_seed) {}

    // Creates on first use (gaussian, given stddev), returns the existing
    // parameter afterwards. Shape must match on reuse.
    Var weight(const std::string& name, const std::vector<int>& shape, double stddev);
    // Same but constant-initialized.
    Var constant(const std::string& name, const std::vector<int>& shape, double value);

    bool has(const std::string& name) const { return map_.count(name) > 0; }
    Var find(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }

    BNState& bn_state(const std::string& name);

    void zero_grads();
    // Momentum SGD: v = mu*v + g; p -= lr*v.
    void sgd_step(double lr, double mu);

    int64_t param_count() const;
    double grad_max_abs() const;

    // Text manifest (name, shape, offset in doubles) + "DATA" + little-endian
    // 64-bit floats: parameters first, then BN running stats (mean, var).
    void save(const std::string& path) const;
    void load(const std::string& path);

    // Deep copy of all parameter/stat values (for best-checkpoint rollback).
    std::vector<Tensor> snapshot_values() const;
    void restore_values(const std::vector<Tensor>& snap);

   private:
    struct Entry {
        Var var;
        Tensor velocity;
    };
    Var create(const std::string& name, const std::vector<int>& shape, Tensor init);

    Rng rng_;
    std::vector<std::string> order_;
    std::unordered_map<std::string, Entry> map_;
    std::vector<std::string> state_order_;
    std::unordered_map<std::string, BNState> states_;
};

}  // namespace spikefet
