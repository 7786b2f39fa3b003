#include "spikefet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace spikefet {

int shape_numel(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative tensor extent");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (static_cast<size_t>(shape_numel(shape_)) != data_.size())
        throw std::invalid_argument("tensor shape/value count mismatch: shape " + shape_str() +
                                    " vs " + std::to_string(data_.size()) + " values");
}

Tensor Tensor::zeros(const std::vector<int>& shape) { return Tensor(shape); }

Tensor Tensor::full(const std::vector<int>& shape, double v) {
    Tensor t(shape);
    t.fill(v);
    return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::randn(const std::vector<int>& shape, Rng& rng, double stddev) {
    Tensor t(shape);
    for (int i = 0; i < t.numel(); ++i) t[i] = rng.normal() * stddev;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

double Tensor::mean() const {
    if (data_.empty()) throw std::runtime_error("mean of empty tensor");
    return sum() / static_cast<double>(data_.size());
}

double Tensor::min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::min(m, v);
    return m;
}

double Tensor::max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::max(m, v);
    return m;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_inplace(const Tensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("add_inplace shape mismatch");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
}

void Tensor::axpy_inplace(double a, const Tensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("axpy shape mismatch");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ",";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

}  // namespace spikefet
