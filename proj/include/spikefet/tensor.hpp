#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikefet/rng.hpp"

namespace spikefet {

// Dense row-major tensor of doubles. Activations use the canonical layout
// [T, C, H, W]; token matrices use [N, C].
class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> values);

    static Tensor zeros(const std::vector<int>& shape);
    static Tensor full(const std::vector<int>& shape, double v);
    static Tensor scalar(double v);
    static Tensor randn(const std::vector<int>& shape, Rng& rng, double stddev = 1.0);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int numel() const { return static_cast<int>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<size_t>(i)]; }

    // [T, C, H, W] accessors
    double& at4(int t, int c, int y, int x) {
        return data_[static_cast<size_t>(((t * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }
    double at4(int t, int c, int y, int x) const {
        return data_[static_cast<size_t>(((t * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }
    // [N, C] accessors
    double& at2(int n, int c) { return data_[static_cast<size_t>(n * shape_[1] + c)]; }
    double at2(int n, int c) const { return data_[static_cast<size_t>(n * shape_[1] + c)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    double sum() const;
    double mean() const;
    double min() const;
    double max() const;

    void fill(double v);
    void add_inplace(const Tensor& o);           // elementwise, same shape
    void axpy_inplace(double a, const Tensor& o); // this += a * o

    std::string shape_str() const;

   private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

int shape_numel(const std::vector<int>& shape);

}  // namespace spikefet
