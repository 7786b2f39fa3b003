#include "spikefet/params.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spikefet {

Var ParamStore::create(const std::string& name, const std::vector<int>& shape, Tensor init) {
    auto it = map_.find(name);
    if (it != map_.end()) {
        if (it->second.var.value().shape() != shape)
            throw std::invalid_argument("parameter '" + name + "' reused with a different shape");
        return it->second.var;
    }
    Entry e;
    e.var = Var::leaf(std::move(init), true, name);
    e.velocity = Tensor::zeros(shape);
    order_.push_back(name);
    map_.emplace(name, std::move(e));
    return map_.at(name).var;
}

namespace {

void check_reuse_shape(const std::string& name, const Tensor& existing,
                       const std::vector<int>& shape) {
    if (existing.shape() != shape) {
        std::string want;
        for (int d : shape) want += (want.empty() ? "[" : ",") + std::to_string(d);
        throw std::invalid_argument("parameter '" + name + "' reused with shape " + want +
                                    "], created as " + existing.shape_str());
    }
}

}  // namespace

Var ParamStore::weight(const std::string& name, const std::vector<int>& shape, double stddev) {
    if (has(name)) {
        check_reuse_shape(name, map_.at(name).var.value(), shape);
        return map_.at(name).var;
    }
    return create(name, shape, Tensor::randn(shape, rng_, stddev));
}

Var ParamStore::constant(const std::string& name, const std::vector<int>& shape, double value) {
    if (has(name)) {
        check_reuse_shape(name, map_.at(name).var.value(), shape);
        return map_.at(name).var;
    }
    return create(name, shape, Tensor::full(shape, value));
}

Var ParamStore::find(const std::string& name) const {
    auto it = map_.find(name);
    if (it == map_.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
    return it->second.var;
}

BNState& ParamStore::bn_state(const std::string& name) {
    auto it = states_.find(name);
    if (it == states_.end()) {
        state_order_.push_back(name);
        it = states_.emplace(name, BNState{}).first;
    }
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& name : order_) {
        auto& e = map_.at(name);
        e.var.grad_mut().fill(0.0);
    }
}

void ParamStore::sgd_step(double lr, double mu) {
    for (auto& name : order_) {
        auto& e = map_.at(name);
        const Tensor& g = e.var.node()->grad;
        if (g.numel() != e.var.value().numel()) continue;  // never touched by backward
        Tensor& v = e.velocity;
        Tensor& p = e.var.value_mut();
        for (int i = 0; i < p.numel(); ++i) {
            v[i] = mu * v[i] + g[i];
            p[i] -= lr * v[i];
        }
    }
}

int64_t ParamStore::param_count() const {
    int64_t n = 0;
    for (auto& name : order_) n += map_.at(name).var.value().numel();
    return n;
}

double ParamStore::grad_max_abs() const {
    double m = 0.0;
    for (auto& name : order_) {
        const Tensor& g = map_.at(name).var.node()->grad;
        for (int i = 0; i < g.numel(); ++i) m = std::max(m, std::abs(g[i]));
    }
    return m;
}

namespace {

void write_doubles(std::ofstream& os, const Tensor& t) {
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(sizeof(double) * t.numel()));
}

void read_doubles(std::ifstream& is, Tensor& t) {
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * t.numel()));
    if (!is) throw std::runtime_error("checkpoint: truncated data section");
}

}  // namespace

void ParamStore::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint save: cannot open " + path);
    os << "spikefet-checkpoint v1\n";
    os << "params " << order_.size() << "\n";
    int64_t offset = 0;
    for (const auto& name : order_) {
        const Tensor& v = map_.at(name).var.value();
        os << name << " " << offset;
        os << " " << v.ndim();
        for (int d : v.shape()) os << " " << d;
        os << "\n";
        offset += v.numel();
    }
    os << "states " << state_order_.size() << "\n";
    for (const auto& name : state_order_) {
        const BNState& s = states_.at(name);
        os << name << " " << offset << " " << s.running_mean.numel() << "\n";
        offset += 2 * s.running_mean.numel();
    }
    os << "DATA\n";
    for (const auto& name : order_) write_doubles(os, map_.at(name).var.value());
    for (const auto& name : state_order_) {
        write_doubles(os, states_.at(name).running_mean);
        write_doubles(os, states_.at(name).running_var);
    }
    if (!os) throw std::runtime_error("checkpoint save: write failed for " + path);
}

void ParamStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint load: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != "spikefet-checkpoint v1")
        throw std::runtime_error("checkpoint load: bad header in " + path);

    auto expect_count = [&](const char* word) {
        std::string w;
        size_t n;
        if (!std::getline(is, line)) throw std::runtime_error("checkpoint load: truncated manifest");
        std::istringstream ls(line);
        if (!(ls >> w >> n) || w != word)
            throw std::runtime_error("checkpoint load: expected '" + std::string(word) + " <n>'");
        return n;
    };

    struct PRec {
        std::string name;
        std::vector<int> shape;
    };
    size_t np = expect_count("params");
    std::vector<PRec> precs(np);
    for (size_t i = 0; i < np; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("checkpoint load: truncated manifest");
        std::istringstream ls(line);
        int64_t off;
        int nd;
        if (!(ls >> precs[i].name >> off >> nd))
            throw std::runtime_error("checkpoint load: bad parameter record '" + line + "'");
        precs[i].shape.resize(nd);
        for (int d = 0; d < nd; ++d)
            if (!(ls >> precs[i].shape[d]))
                throw std::runtime_error("checkpoint load: bad shape in '" + line + "'");
    }
    struct SRec {
        std::string name;
        int channels;
    };
    size_t ns = expect_count("states");
    std::vector<SRec> srecs(ns);
    for (size_t i = 0; i < ns; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("checkpoint load: truncated manifest");
        std::istringstream ls(line);
        int64_t off;
        if (!(ls >> srecs[i].name >> off >> srecs[i].channels))
            throw std::runtime_error("checkpoint load: bad state record '" + line + "'");
    }
    if (!std::getline(is, line) || line != "DATA")
        throw std::runtime_error("checkpoint load: missing DATA marker");

    for (const auto& r : precs) {
        Tensor t(r.shape);
        read_doubles(is, t);
        auto it = map_.find(r.name);
        if (it != map_.end()) {
            if (it->second.var.value().shape() != r.shape)
                throw std::runtime_error("checkpoint load: shape mismatch for '" + r.name + "'");
            it->second.var.value_mut() = std::move(t);
            it->second.velocity.fill(0.0);
        } else {
            create(r.name, r.shape, std::move(t));
        }
    }
    for (const auto& r : srecs) {
        BNState& s = bn_state(r.name);
        s.running_mean = Tensor::zeros({r.channels});
        s.running_var = Tensor::zeros({r.channels});
        read_doubles(is, s.running_mean);
        read_doubles(is, s.running_var);
        s.initialized = true;
    }
}

std::vector<Tensor> ParamStore::snapshot_values() const {
    std::vector<Tensor> snap;
    snap.reserve(order_.size() + 2 * state_order_.size());
    for (const auto& name : order_) snap.push_back(map_.at(name).var.value());
    for (const auto& name : state_order_) {
        snap.push_back(states_.at(name).running_mean);
        snap.push_back(states_.at(name).running_var);
    }
    return snap;
}

void ParamStore::restore_values(const std::vector<Tensor>& snap) {
    if (snap.size() != order_.size() + 2 * state_order_.size())
        throw std::invalid_argument("restore_values: snapshot does not match the store");
    size_t k = 0;
    for (const auto& name : order_) map_.at(name).var.value_mut() = snap[k++];
    for (const auto& name : state_order_) {
        states_.at(name).running_mean = snap[k++];
        states_.at(name).running_var = snap[k++];
    }
}

}  // namespace spikefet
