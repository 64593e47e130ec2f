#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vdan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense N-d tensor of doubles, row-major, with an optional gradient buffer.
// Copies are shallow (shared storage); ops produce fresh tensors.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(p_); }
    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t rank() const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);

    // Copies are shallow handles onto shared storage, so buffer access stays
    // mutable through const handles (shared_ptr semantics). Ops never write
    // into their inputs' values; gradients accumulate through these spans.
    std::span<double> data() const;

    bool has_grad() const;
    void ensure_grad() const;  // allocates a zeroed gradient buffer if absent
    void zero_grad() const;
    std::span<double> grad() const;

    // scalar convenience accessors
    double value() const;       // throws unless numel() == 1
    double grad_value() const;  // throws unless numel() == 1

    bool same_storage(const Tensor& other) const { return p_ == other.p_; }

    Tensor clone() const;  // deep copy of values (no grad, no sharing)

private:
    struct Payload {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;  // empty until ensure_grad()
        bool requires_grad = false;
    };
    std::shared_ptr<Payload> p_;
};

bool all_finite(const Tensor& t);

// Ordered record of the backward steps of executed ops. backward() visits the
// record in exact reverse execution order; gradients from multiple uses of a
// tensor accumulate by summation. Calling backward() twice without recording
// new ops is an error.
class Tape {
public:
    void record(std::function<void()> backward_step);
    void backward(const Tensor& loss);
    void reset();
    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
    std::size_t backward_mark_ = 0;
    bool backward_ran_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable ops. `tape == nullptr` runs the forward computation only;
// with a tape, every input and output gets a gradient buffer and the op's
// backward step is recorded.
// ---------------------------------------------------------------------------

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);

// x scaled by a trainable single-element tensor
Tensor mul_scalar(Tape* tape, const Tensor& x, const Tensor& s);
// x scaled by a compile-time constant (no gradient w.r.t. c)
Tensor scale_const(Tape* tape, const Tensor& x, double c);

// The one sanctioned broadcast: weight vector w multiplied along `axis` of x.
// Any other shape mismatch in mul/add is rejected.
Tensor scale_axis(Tape* tape, const Tensor& x, const Tensor& w, std::size_t axis);

Tensor exp(Tape* tape, const Tensor& x);
Tensor sigmoid(Tape* tape, const Tensor& x);
Tensor relu(Tape* tape, const Tensor& x);
Tensor tanh(Tape* tape, const Tensor& x);

// y = x.W + b for x of shape [n] or [B, n], W [n, m], b [m]
Tensor affine(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b);

Tensor reduce_mean(Tape* tape, const Tensor& x, std::vector<std::size_t> axes);
Tensor reduce_sum(Tape* tape, const Tensor& x, std::vector<std::size_t> axes);

// softmax over the last axis
Tensor softmax(Tape* tape, const Tensor& x);
// fused stable log-softmax + negative log likelihood of `label`, logits [K]
Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits, std::size_t label);

Tensor concat(Tape* tape, std::span<const Tensor> parts, std::size_t axis);
Tensor reshape(Tape* tape, const Tensor& x, Shape shape);
Tensor permute(Tape* tape, const Tensor& x, std::vector<std::size_t> perm);
Tensor slice(Tape* tape, const Tensor& x, std::size_t axis, std::size_t start, std::size_t len);

// 1-D convolutions over x of shape [channels, T].
// depthwise: per-channel kernel [channels, K] with zero 'same' padding.
// pointwise: channel mixing weights [in_channels, out_channels].
Tensor depthwise_conv1d(Tape* tape, const Tensor& x, const Tensor& kernel, const Tensor& bias);
Tensor pointwise_conv1d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& bias);

// keeps columns 0, stride, 2*stride, ...; requires T % stride == 0
Tensor downsample_time(Tape* tape, const Tensor& x, std::size_t stride);

// Central-difference check of the analytic gradients of loss_fn w.r.t. every
// entry of every tensor in `params`. loss_fn must be deterministic (freeze
// any sampling noise first). Returns
//   max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<Tensor(Tape&)>& loss_fn,
                  std::span<const Tensor> params, double step);

}  // namespace vdan
