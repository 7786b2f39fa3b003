#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "spikefet/tensor.hpp"

namespace spikefet {

// Spiking neuron layer SN(.): integer spike counts with a straight-through
// surrogate gradient equal to the indicator of the open window (0, d_max).
struct SpikeNeuronConfig {
    int d_max = 4;
};

// In hard mode SN(x) = clamp(round(x), 0, D) (training/inference forward).
// In smooth mode SN(x) = clamp(x, 0, D), whose a.e. derivative equals the
// declared surrogate; finite-difference checks of composite blocks run here.
enum class SpikeMode { hard, smooth };

struct ConvSpec {
    enum class Kind { standard, pointwise, depthwise };
    Kind kind = Kind::standard;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int padding = 0;

    void validate() const;
    int out_extent(int in) const;  // floor((in + 2*padding - kernel)/stride) + 1
    // Weight tensor shape: standard/pointwise [Co,Ci,k,k]; depthwise [C,1,k,k].
    std::vector<int> weight_shape() const;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<NodePtr> inputs;
    std::function<void(Node&)> backward_fn;
    std::string name;

    Tensor& ensure_grad();
};

class Var {
   public:
    Var() = default;
    explicit Var(NodePtr n) : n_(std::move(n)) {}
    static Var leaf(Tensor v, bool requires_grad = false, std::string name = "");

    bool defined() const { return n_ != nullptr; }
    const Tensor& value() const { return n_->value; }
    Tensor& value_mut() { return n_->value; }
    const Tensor& grad() const { return n_->grad; }
    Tensor& grad_mut() { return n_->ensure_grad(); }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    const NodePtr& node() const { return n_; }

   private:
    NodePtr n_;
};

// Reverse pass from a scalar output: clears grads over the reachable graph,
// seeds d(out)/d(out) = 1, runs hand-written backwards in reverse topo order.
void backward(const Var& out);

// ---- elementwise / shape ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_const(const Var& a, const Tensor& c);
Var affine_elem(const Var& x, const Tensor& scale, const Tensor& shift);  // y_i = s_i*x_i + t_i
Var sum(const Var& a);   // -> [1]
Var mean(const Var& a);  // -> [1]
Var logistic(const Var& a);
Var spike(const Var& a, const SpikeNeuronConfig& cfg, SpikeMode mode);
Var reshape(const Var& a, std::vector<int> shape);
Var crop_hw(const Var& x, int y0, int x0, int h, int w);
Var image_to_tokens(const Var& x);                       // [1,C,H,W] -> [H*W,C]
Var tokens_to_image(const Var& x, int h, int w);         // [h*w,C] -> [1,C,h,w]
Var concat_tokens(const std::vector<Var>& parts);        // stack [Ni,C] along rows
Var slice_tokens(const Var& x, int row0, int row1);
Var gather_rows(const Var& table, const std::vector<int>& ids);
Var add_row_broadcast(const Var& x, const Var& v);       // [N,C] + [C]
Var gather_cell(const Var& x, int y, int xcol);          // [1,C,H,W] -> [C]
Var concat_vec(const std::vector<Var>& parts);           // 1-D concat

// ---- dense layers ----
Var conv2d(const Var& x, const Var& w, const Var& b, const ConvSpec& spec);
Var linear(const Var& x, const Var& w, const Var& b);    // [N,Ci]x[Ci,Co]+[Co]

struct BNState {
    Tensor running_mean;  // [C]
    Tensor running_var;   // [C]
    bool initialized = false;
};

// Per-channel batch norm; stats over (T,H,W) for 4-D input, over rows for 2-D.
// Training mode uses batch stats and updates `state` (momentum 0.1 by default).
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BNState& state, bool training,
               double momentum = 0.1, double eps = 1e-5);

// ---- stripe spiking self-attention ----
// Token grid partitioned stripe lists (token indices into the [N,*] matrices).
struct StripePlan {
    int heads = 4;  // first half horizontal stripes, second half vertical
    std::vector<std::vector<int>> horizontal;
    std::vector<std::vector<int>> vertical;
};

// Per head h and stripe s: out = SN(scale * (Q K^T) V) in that product order.
// Q,K: [N,C]; V: [N,Cv]; output [N,Cv].
Var stripe_ssa(const Var& q, const Var& k, const Var& v, const StripePlan& plan, double scale,
               const SpikeNeuronConfig& cfg, SpikeMode mode);

// ---- losses (fused scalar ops) ----
Var gwf_focal(const Var& pred, const Tensor& heat, double focal_a, double focal_b);
Var str_loss(const Var& f1, const Var& f2);
Var response_loss(const Var& rf, const Var& re, double tau, double focal_a, double focal_b);
Var giou_loss(const Var& pred_box, const Tensor& gt_box);  // boxes (cx,cy,w,h)
Var l1_loss(const Var& pred_box, const Tensor& gt_box);

// Raw box overlap helpers (also used by metrics).
double iou_cxcywh(const double* a, const double* b);
double giou_cxcywh(const double* a, const double* b);

}  // namespace spikefet
