#include "vdan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vdan {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t d = shape.size(); d-- > 1;) {
        strides[d - 1] = strides[d] * shape[d];
    }
    return strides;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    for (std::size_t e : shape) {
        require(e > 0, "Tensor: zero-extent axis in shape " + shape_str(shape));
    }
    Tensor t;
    t.p_ = std::make_shared<Payload>();
    t.p_->shape = std::move(shape);
    t.p_->value.assign(shape_numel(t.p_->shape), 0.0);
    t.p_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.p_->value.begin(), t.p_->value.end(), value);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    require(shape_numel(shape) == values.size(),
            "Tensor::from: " + std::to_string(values.size()) +
            " values do not fill shape " + shape_str(shape));
    Tensor t = zeros(std::move(shape), requires_grad);
    t.p_->value = std::move(values);
    return t;
}

const Shape& Tensor::shape() const { return p_->shape; }
std::size_t Tensor::numel() const { return p_->value.size(); }
std::size_t Tensor::rank() const { return p_->shape.size(); }

bool Tensor::requires_grad() const { return p_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { p_->requires_grad = flag; }

std::span<double> Tensor::data() const { return p_->value; }

bool Tensor::has_grad() const { return !p_->grad.empty(); }

void Tensor::ensure_grad() const {
    if (p_->grad.empty()) p_->grad.assign(p_->value.size(), 0.0);
}

void Tensor::zero_grad() const {
    std::fill(p_->grad.begin(), p_->grad.end(), 0.0);
}

std::span<double> Tensor::grad() const {
    if (!has_grad()) throw std::runtime_error("Tensor::grad: no gradient buffer");
    return p_->grad;
}

double Tensor::value() const {
    if (numel() != 1) {
        throw std::runtime_error("Tensor::value: tensor of shape " + shape_str(shape()) +
                                 " is not a scalar");
    }
    return p_->value[0];
}

double Tensor::grad_value() const {
    if (numel() != 1 || !has_grad()) throw std::runtime_error("Tensor::grad_value: not a scalar with grad");
    return p_->grad[0];
}

Tensor Tensor::clone() const {
    Tensor t = zeros(shape(), requires_grad());
    std::copy(p_->value.begin(), p_->value.end(), t.p_->value.begin());
    return t;
}

bool all_finite(const Tensor& t) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

void Tape::record(std::function<void()> backward_step) {
    nodes_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw std::invalid_argument("Tape::backward: loss must be a scalar, got shape " +
                                    shape_str(loss.shape()));
    }
    if (backward_ran_ && nodes_.size() == backward_mark_) {
        throw std::runtime_error("Tape::backward: called twice without re-executing the forward pass");
    }
    Tensor seed = loss;
    seed.ensure_grad();
    seed.grad()[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        nodes_[i]();
    }
    backward_ran_ = true;
    backward_mark_ = nodes_.size();
}

void Tape::reset() {
    nodes_.clear();
    backward_ran_ = false;
    backward_mark_ = 0;
}

// ---------------------------------------------------------------------------
// Op helpers
// ---------------------------------------------------------------------------

namespace {

// Prepare the output of a tape op: allocate grads on output and every input so
// backward steps can accumulate unconditionally.
void attach(Tape* tape, Tensor& out, std::initializer_list<Tensor> inputs) {
    if (!tape) return;
    out.ensure_grad();
    for (Tensor t : inputs) t.ensure_grad();
}

Tensor unary_elementwise(Tape* tape, const Tensor& x,
                         double (*fwd)(double), double (*dfdy)(double, double)) {
    Tensor y = Tensor::zeros(x.shape());
    auto xd = x.data();
    auto yd = y.data();
    for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = fwd(xd[i]);
    attach(tape, y, {x});
    if (tape) {
        tape->record([x, y, dfdy]() mutable {
            auto gx = x.grad();
            auto gy = y.grad();
            auto xv = x.data();
            auto yv = y.data();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += dfdy(xv[i], yv[i]) * gy[i];
        });
    }
    return y;
}

double sigmoid_scalar(double v) {
    if (v >= 0.0) {
        const double e = std::exp(-v);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    Tensor y = Tensor::zeros(a.shape());
    auto ad = a.data(); auto bd = b.data(); auto yd = y.data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = ad[i] + bd[i];
    attach(tape, y, {a, b});
    if (tape) {
        tape->record([a, b, y]() mutable {
            auto gy = y.grad(); auto ga = a.grad(); auto gb = b.grad();
            for (std::size_t i = 0; i < gy.size(); ++i) { ga[i] += gy[i]; gb[i] += gy[i]; }
        });
    }
    return y;
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "sub: shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    Tensor y = Tensor::zeros(a.shape());
    auto ad = a.data(); auto bd = b.data(); auto yd = y.data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = ad[i] - bd[i];
    attach(tape, y, {a, b});
    if (tape) {
        tape->record([a, b, y]() mutable {
            auto gy = y.grad(); auto ga = a.grad(); auto gb = b.grad();
            for (std::size_t i = 0; i < gy.size(); ++i) { ga[i] += gy[i]; gb[i] -= gy[i]; }
        });
    }
    return y;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(),
            "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()) +
            " (general broadcasting is not supported; see scale_axis)");
    Tensor y = Tensor::zeros(a.shape());
    auto ad = a.data(); auto bd = b.data(); auto yd = y.data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = ad[i] * bd[i];
    attach(tape, y, {a, b});
    if (tape) {
        tape->record([a, b, y]() mutable {
            auto gy = y.grad(); auto ga = a.grad(); auto gb = b.grad();
            auto av = a.data(); auto bv = b.data();
            for (std::size_t i = 0; i < gy.size(); ++i) {
                ga[i] += bv[i] * gy[i];
                gb[i] += av[i] * gy[i];
            }
        });
    }
    return y;
}

Tensor mul_scalar(Tape* tape, const Tensor& x, const Tensor& s) {
    require(s.numel() == 1, "mul_scalar: scale must have a single element, got " +
                            shape_str(s.shape()));
    const double sv = s.data()[0];
    Tensor y = Tensor::zeros(x.shape());
    auto xd = x.data(); auto yd = y.data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = sv * xd[i];
    attach(tape, y, {x, s});
    if (tape) {
        tape->record([x, s, y]() mutable {
            auto gy = y.grad(); auto gx = x.grad();
            auto xv = x.data();
            const double sval = s.data()[0];
            double gs = 0.0;
            for (std::size_t i = 0; i < gy.size(); ++i) {
                gx[i] += sval * gy[i];
                gs += xv[i] * gy[i];
            }
            s.grad()[0] += gs;
        });
    }
    return y;
}

Tensor scale_const(Tape* tape, const Tensor& x, double c) {
    Tensor y = Tensor::zeros(x.shape());
    auto xd = x.data(); auto yd = y.data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = c * xd[i];
    attach(tape, y, {x});
    if (tape) {
        tape->record([x, y, c]() mutable {
            auto gy = y.grad(); auto gx = x.grad();
            for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += c * gy[i];
        });
    }
    return y;
}

Tensor scale_axis(Tape* tape, const Tensor& x, const Tensor& w, std::size_t axis) {
    require(axis < x.rank(), "scale_axis: axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(x.shape()));
    require(w.rank() == 1 && w.numel() == x.shape()[axis],
            "scale_axis: weight length " + std::to_string(w.numel()) +
            " does not match axis extent " + std::to_string(x.shape()[axis]));
    const auto strides = row_major_strides(x.shape());
    const std::size_t extent = x.shape()[axis];
    const std::size_t inner = strides[axis];
    const std::size_t outer = x.numel() / (extent * inner);

    Tensor y = Tensor::zeros(x.shape());
    {
        auto xd = x.data(); auto wd = w.data(); auto yd = y.data();
        for (std::size_t o = 0; o < outer; ++o) {
            const std::size_t base_o = o * extent * inner;
            for (std::size_t e = 0; e < extent; ++e) {
                const double wv = wd[e];
                const std::size_t base = base_o + e * inner;
                for (std::size_t i = 0; i < inner; ++i) yd[base + i] = wv * xd[base + i];
            }
        }
    }
    attach(tape, y, {x, w});
    if (tape) {
        tape->record([x, w, y, outer, extent, inner]() mutable {
            auto gy = y.grad(); auto gx = x.grad(); auto gw = w.grad();
            auto xv = x.data(); auto wv = w.data();
            for (std::size_t o = 0; o < outer; ++o) {
                const std::size_t base_o = o * extent * inner;
                for (std::size_t e = 0; e < extent; ++e) {
                    const double we = wv[e];
                    const std::size_t base = base_o + e * inner;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < inner; ++i) {
                        gx[base + i] += we * gy[base + i];
                        acc += xv[base + i] * gy[base + i];
                    }
                    gw[e] += acc;
                }
            }
        });
    }
    return y;
}

Tensor exp(Tape* tape, const Tensor& x) {
    Tensor y = unary_elementwise(tape, x,
        [](double v) { return std::exp(v); },
        [](double, double yv) { return yv; });
    if (!all_finite(y)) throw std::runtime_error("exp: non-finite result (overflow)");
    return y;
}

Tensor sigmoid(Tape* tape, const Tensor& x) {
    return unary_elementwise(tape, x,
        [](double v) { return sigmoid_scalar(v); },
        [](double, double yv) { return yv * (1.0 - yv); });
}

Tensor relu(Tape* tape, const Tensor& x) {
    return unary_elementwise(tape, x,
        [](double v) { return v > 0.0 ? v : 0.0; },
        [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(Tape* tape, const Tensor& x) {
    return unary_elementwise(tape, x,
        [](double v) { return std::tanh(v); },
        [](double, double yv) { return 1.0 - yv * yv; });
}

// ---------------------------------------------------------------------------
// affine
// ---------------------------------------------------------------------------

Tensor affine(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    require(w.rank() == 2, "affine: weight must be a matrix, got " + shape_str(w.shape()));
    require(x.rank() == 1 || x.rank() == 2,
            "affine: input must be a vector or batch of vectors, got " + shape_str(x.shape()));
    const std::size_t n = w.shape()[0];
    const std::size_t m = w.shape()[1];
    const std::size_t in_dim = x.rank() == 1 ? x.shape()[0] : x.shape()[1];
    const std::size_t batch = x.rank() == 1 ? 1 : x.shape()[0];
    require(in_dim == n, "affine: inner dimensions disagree (" + std::to_string(in_dim) +
                         " vs " + std::to_string(n) + ")");
    require(b.rank() == 1 && b.numel() == m,
            "affine: bias length " + std::to_string(b.numel()) + " != " + std::to_string(m));

    Shape out_shape = x.rank() == 1 ? Shape{m} : Shape{batch, m};
    Tensor y = Tensor::zeros(out_shape);
    {
        auto xd = x.data(); auto wd = w.data(); auto bd = b.data(); auto yd = y.data();
        for (std::size_t r = 0; r < batch; ++r) {
            double* out_row = yd.data() + r * m;
            const double* x_row = xd.data() + r * n;
            for (std::size_t j = 0; j < m; ++j) out_row[j] = bd[j];
            for (std::size_t i = 0; i < n; ++i) {
                const double xv = x_row[i];
                const double* w_row = wd.data() + i * m;
                for (std::size_t j = 0; j < m; ++j) out_row[j] += xv * w_row[j];
            }
        }
    }
    attach(tape, y, {x, w, b});
    if (tape) {
        tape->record([x, w, b, y, batch, n, m]() mutable {
            auto gy = y.grad(); auto gx = x.grad(); auto gw = w.grad(); auto gb = b.grad();
            auto xv = x.data(); auto wv = w.data();
            for (std::size_t r = 0; r < batch; ++r) {
                const double* gy_row = gy.data() + r * m;
                const double* x_row = xv.data() + r * n;
                double* gx_row = gx.data() + r * n;
                for (std::size_t j = 0; j < m; ++j) gb[j] += gy_row[j];
                for (std::size_t i = 0; i < n; ++i) {
                    const double* w_row = wv.data() + i * m;
                    double* gw_row = gw.data() + i * m;
                    const double xr = x_row[i];
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                        acc += w_row[j] * gy_row[j];
                        gw_row[j] += xr * gy_row[j];
                    }
                    gx_row[i] += acc;
                }
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

namespace {

struct ReducePlan {
    Shape out_shape;             // reduced shape ({1} when everything is reduced)
    std::vector<std::size_t> out_index_of_flat;  // input flat idx -> output flat idx
    std::size_t group_size = 1;  // number of input elements per output element
};

ReducePlan plan_reduction(const Tensor& x, const std::vector<std::size_t>& axes) {
    require(x.numel() > 0, "reduce: empty tensor");
    std::vector<bool> reduced(x.rank(), false);
    for (std::size_t a : axes) {
        require(a < x.rank(), "reduce: axis " + std::to_string(a) +
                              " out of range for shape " + shape_str(x.shape()));
        require(!reduced[a], "reduce: duplicate axis " + std::to_string(a));
        reduced[a] = true;
    }
    ReducePlan plan;
    for (std::size_t d = 0; d < x.rank(); ++d) {
        if (!reduced[d]) plan.out_shape.push_back(x.shape()[d]);
        else plan.group_size *= x.shape()[d];
    }
    if (plan.out_shape.empty()) plan.out_shape = {1};

    const auto in_strides = row_major_strides(x.shape());
    const auto out_strides = row_major_strides(plan.out_shape);
    plan.out_index_of_flat.resize(x.numel());
    for (std::size_t flat = 0; flat < x.numel(); ++flat) {
        std::size_t rem = flat;
        std::size_t out_flat = 0;
        std::size_t out_d = 0;
        for (std::size_t d = 0; d < x.rank(); ++d) {
            const std::size_t idx = rem / in_strides[d];
            rem %= in_strides[d];
            if (!reduced[d]) {
                out_flat += idx * out_strides[out_d];
                ++out_d;
            }
        }
        plan.out_index_of_flat[flat] = out_flat;
    }
    return plan;
}

Tensor reduce_impl(Tape* tape, const Tensor& x, std::vector<std::size_t> axes, bool mean) {
    ReducePlan plan = plan_reduction(x, axes);
    const double scale = mean ? 1.0 / static_cast<double>(plan.group_size) : 1.0;
    Tensor y = Tensor::zeros(plan.out_shape);
    {
        auto xd = x.data(); auto yd = y.data();
        for (std::size_t i = 0; i < xd.size(); ++i) yd[plan.out_index_of_flat[i]] += xd[i];
        if (mean) {
            for (double& v : yd) v *= scale;
        }
    }
    attach(tape, y, {x});
    if (tape) {
        auto map = std::make_shared<std::vector<std::size_t>>(std::move(plan.out_index_of_flat));
        tape->record([x, y, map, scale]() mutable {
            auto gy = y.grad(); auto gx = x.grad();
            const auto& m = *map;
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += scale * gy[m[i]];
        });
    }
    return y;
}

}  // namespace

Tensor reduce_mean(Tape* tape, const Tensor& x, std::vector<std::size_t> axes) {
    return reduce_impl(tape, x, std::move(axes), true);
}

Tensor reduce_sum(Tape* tape, const Tensor& x, std::vector<std::size_t> axes) {
    return reduce_impl(tape, x, std::move(axes), false);
}

// ---------------------------------------------------------------------------
// softmax / cross-entropy
// ---------------------------------------------------------------------------

Tensor softmax(Tape* tape, const Tensor& x) {
    require(x.rank() >= 1, "softmax: rank-0 input");
    const std::size_t k = x.shape().back();
    const std::size_t rows = x.numel() / k;
    Tensor y = Tensor::zeros(x.shape());
    {
        auto xd = x.data(); auto yd = y.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = xd.data() + r * k;
            double* yr = yd.data() + r * k;
            double m = xr[0];
            for (std::size_t j = 1; j < k; ++j) m = std::max(m, xr[j]);
            double z = 0.0;
            for (std::size_t j = 0; j < k; ++j) { yr[j] = std::exp(xr[j] - m); z += yr[j]; }
            for (std::size_t j = 0; j < k; ++j) yr[j] /= z;
        }
    }
    attach(tape, y, {x});
    if (tape) {
        tape->record([x, y, rows, k]() mutable {
            auto gy = y.grad(); auto gx = x.grad(); auto yv = y.data();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* yr = yv.data() + r * k;
                const double* gr = gy.data() + r * k;
                double dot = 0.0;
                for (std::size_t j = 0; j < k; ++j) dot += yr[j] * gr[j];
                double* gxr = gx.data() + r * k;
                for (std::size_t j = 0; j < k; ++j) gxr[j] += yr[j] * (gr[j] - dot);
            }
        });
    }
    return y;
}

Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits, std::size_t label) {
    require(logits.rank() == 1, "softmax_cross_entropy: logits must be a vector, got " +
                                shape_str(logits.shape()));
    const std::size_t k = logits.numel();
    require(label < k, "softmax_cross_entropy: label " + std::to_string(label) +
                       " out of range for " + std::to_string(k) + " classes");
    auto ld = logits.data();
    double m = ld[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, ld[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(ld[j] - m);
    const double lse = m + std::log(z);
    Tensor y = Tensor::scalar(lse - ld[label]);
    if (!all_finite(y)) throw std::runtime_error("softmax_cross_entropy: non-finite loss");
    attach(tape, y, {logits});
    if (tape) {
        tape->record([logits, y, label, m, z, k]() mutable {
            const double g = y.grad()[0];
            auto gl = logits.grad(); auto lv = logits.data();
            for (std::size_t j = 0; j < k; ++j) {
                const double p = std::exp(lv[j] - m) / z;
                gl[j] += g * (p - (j == label ? 1.0 : 0.0));
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

Tensor concat(Tape* tape, std::span<const Tensor> parts, std::size_t axis) {
    require(!parts.empty(), "concat: no inputs");
    const Tensor& first = parts[0];
    require(axis < first.rank(), "concat: axis out of range");
    Shape out_shape = first.shape();
    std::size_t total = first.shape()[axis];
    for (std::size_t p = 1; p < parts.size(); ++p) {
        require(parts[p].rank() == first.rank(), "concat: rank mismatch");
        for (std::size_t d = 0; d < first.rank(); ++d) {
            if (d == axis) continue;
            require(parts[p].shape()[d] == first.shape()[d],
                    "concat: shape mismatch off the concat axis");
        }
        total += parts[p].shape()[axis];
    }
    out_shape[axis] = total;

    const auto strides = row_major_strides(out_shape);
    const std::size_t inner = strides[axis];
    const std::size_t outer = shape_numel(out_shape) / (total * inner);

    Tensor y = Tensor::zeros(out_shape);
    std::vector<std::size_t> offsets(parts.size());
    {
        auto yd = y.data();
        std::size_t axis_offset = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            offsets[p] = axis_offset;
            const std::size_t ext = parts[p].shape()[axis];
            auto src = parts[p].data();
            for (std::size_t o = 0; o < outer; ++o) {
                const double* s = src.data() + o * ext * inner;
                double* d = yd.data() + (o * total + axis_offset) * inner;
                std::copy(s, s + ext * inner, d);
            }
            axis_offset += ext;
        }
    }
    if (tape) {
        std::vector<Tensor> held(parts.begin(), parts.end());
        y.ensure_grad();
        for (Tensor& t : held) t.ensure_grad();
        tape->record([held = std::move(held), y, offsets, outer, total, inner, axis]() mutable {
            auto gy = y.grad();
            for (std::size_t p = 0; p < held.size(); ++p) {
                const std::size_t ext = held[p].shape()[axis];
                auto gp = held[p].grad();
                for (std::size_t o = 0; o < outer; ++o) {
                    const double* s = gy.data() + (o * total + offsets[p]) * inner;
                    double* d = gp.data() + o * ext * inner;
                    for (std::size_t i = 0; i < ext * inner; ++i) d[i] += s[i];
                }
            }
        });
    }
    return y;
}

Tensor reshape(Tape* tape, const Tensor& x, Shape shape) {
    require(shape_numel(shape) == x.numel(),
            "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    Tensor y = Tensor::zeros(std::move(shape));
    auto xd = x.data(); auto yd = y.data();
    std::copy(xd.begin(), xd.end(), yd.begin());
    attach(tape, y, {x});
    if (tape) {
        tape->record([x, y]() mutable {
            auto gy = y.grad(); auto gx = x.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
        });
    }
    return y;
}

Tensor permute(Tape* tape, const Tensor& x, std::vector<std::size_t> perm) {
    require(perm.size() == x.rank(), "permute: perm length != rank");
    std::vector<bool> seen(x.rank(), false);
    Shape out_shape(x.rank());
    for (std::size_t d = 0; d < x.rank(); ++d) {
        require(perm[d] < x.rank() && !seen[perm[d]], "permute: invalid permutation");
        seen[perm[d]] = true;
        out_shape[d] = x.shape()[perm[d]];
    }
    const auto in_strides = row_major_strides(x.shape());
    const auto out_strides = row_major_strides(out_shape);

    // source flat index -> destination flat index
    auto map = std::make_shared<std::vector<std::size_t>>(x.numel());
    {
        std::vector<std::size_t> inv(x.rank());
        for (std::size_t d = 0; d < x.rank(); ++d) inv[perm[d]] = d;
        for (std::size_t flat = 0; flat < x.numel(); ++flat) {
            std::size_t rem = flat, dst = 0;
            for (std::size_t d = 0; d < x.rank(); ++d) {
                const std::size_t idx = rem / in_strides[d];
                rem %= in_strides[d];
                dst += idx * out_strides[inv[d]];
            }
            (*map)[flat] = dst;
        }
    }
    Tensor y = Tensor::zeros(out_shape);
    {
        auto xd = x.data(); auto yd = y.data();
        for (std::size_t i = 0; i < xd.size(); ++i) yd[(*map)[i]] = xd[i];
    }
    attach(tape, y, {x});
    if (tape) {
        tape->record([x, y, map]() mutable {
            auto gy = y.grad(); auto gx = x.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[(*map)[i]];
        });
    }
    return y;
}

Tensor slice(Tape* tape, const Tensor& x, std::size_t axis, std::size_t start, std::size_t len) {
    require(axis < x.rank(), "slice: axis out of range");
    require(len > 0 && start + len <= x.shape()[axis],
            "slice: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
            ") exceeds extent " + std::to_string(x.shape()[axis]));
    Shape out_shape = x.shape();
    out_shape[axis] = len;
    const auto strides = row_major_strides(x.shape());
    const std::size_t inner = strides[axis];
    const std::size_t extent = x.shape()[axis];
    const std::size_t outer = x.numel() / (extent * inner);

    Tensor y = Tensor::zeros(out_shape);
    {
        auto xd = x.data(); auto yd = y.data();
        for (std::size_t o = 0; o < outer; ++o) {
            const double* s = xd.data() + (o * extent + start) * inner;
            double* d = yd.data() + o * len * inner;
            std::copy(s, s + len * inner, d);
        }
    }
    attach(tape, y, {x});
    if (tape) {
        tape->record([x, y, outer, extent, inner, start, len]() mutable {
            auto gy = y.grad(); auto gx = x.grad();
            for (std::size_t o = 0; o < outer; ++o) {
                const double* s = gy.data() + o * len * inner;
                double* d = gx.data() + (o * extent + start) * inner;
                for (std::size_t i = 0; i < len * inner; ++i) d[i] += s[i];
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// 1-D convolutions, [channels, T]
// ---------------------------------------------------------------------------

Tensor depthwise_conv1d(Tape* tape, const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    require(x.rank() == 2, "depthwise_conv1d: input must be [channels, T], got " +
                           shape_str(x.shape()));
    const std::size_t ch = x.shape()[0];
    const std::size_t t_len = x.shape()[1];
    require(kernel.rank() == 2 && kernel.shape()[0] == ch,
            "depthwise_conv1d: kernel must be [channels, K]");
    const std::size_t k = kernel.shape()[1];
    require(k <= t_len, "depthwise_conv1d: kernel longer than sequence");
    require(bias.rank() == 1 && bias.numel() == ch, "depthwise_conv1d: bias must be [channels]");
    const std::size_t pad = (k - 1) / 2;  // zero 'same' padding, output length == T

    Tensor y = Tensor::zeros(x.shape());
    {
        auto xd = x.data(); auto kd = kernel.data(); auto bd = bias.data(); auto yd = y.data();
        for (std::size_t c = 0; c < ch; ++c) {
            const double* xr = xd.data() + c * t_len;
            const double* kr = kd.data() + c * k;
            double* yr = yd.data() + c * t_len;
            for (std::size_t t = 0; t < t_len; ++t) yr[t] = bd[c];
            for (std::size_t j = 0; j < k; ++j) {
                const double kv = kr[j];
                // y[t] += kv * x[t + j - pad] over the valid t range
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) -
                                             static_cast<std::ptrdiff_t>(pad);
                const std::size_t t_lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t t_hi = shift > 0 ? t_len - static_cast<std::size_t>(shift) : t_len;
                for (std::size_t t = t_lo; t < t_hi; ++t) yr[t] += kv * xr[t + shift];
            }
        }
    }
    attach(tape, y, {x, kernel, bias});
    if (tape) {
        tape->record([x, kernel, bias, y, ch, t_len, k, pad]() mutable {
            auto gy = y.grad(); auto gx = x.grad(); auto gk = kernel.grad(); auto gb = bias.grad();
            auto xv = x.data(); auto kv = kernel.data();
            for (std::size_t c = 0; c < ch; ++c) {
                const double* gyr = gy.data() + c * t_len;
                const double* xr = xv.data() + c * t_len;
                const double* kr = kv.data() + c * k;
                double* gxr = gx.data() + c * t_len;
                double* gkr = gk.data() + c * k;
                double gb_acc = 0.0;
                for (std::size_t t = 0; t < t_len; ++t) gb_acc += gyr[t];
                gb[c] += gb_acc;
                for (std::size_t j = 0; j < k; ++j) {
                    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) -
                                                 static_cast<std::ptrdiff_t>(pad);
                    const std::size_t t_lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                    const std::size_t t_hi = shift > 0 ? t_len - static_cast<std::size_t>(shift)
                                                       : t_len;
                    const double kj = kr[j];
                    double gk_acc = 0.0;
                    for (std::size_t t = t_lo; t < t_hi; ++t) {
                        gxr[t + shift] += kj * gyr[t];
                        gk_acc += xr[t + shift] * gyr[t];
                    }
                    gkr[j] += gk_acc;
                }
            }
        });
    }
    return y;
}

Tensor pointwise_conv1d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
    require(x.rank() == 2, "pointwise_conv1d: input must be [channels, T], got " +
                           shape_str(x.shape()));
    const std::size_t cin = x.shape()[0];
    const std::size_t t_len = x.shape()[1];
    require(w.rank() == 2 && w.shape()[0] == cin,
            "pointwise_conv1d: weights must be [in_channels, out_channels]");
    const std::size_t cout = w.shape()[1];
    require(bias.rank() == 1 && bias.numel() == cout,
            "pointwise_conv1d: bias must be [out_channels]");

    Tensor y = Tensor::zeros({cout, t_len});
    {
        auto xd = x.data(); auto wd = w.data(); auto bd = bias.data(); auto yd = y.data();
        for (std::size_t co = 0; co < cout; ++co) {
            double* yr = yd.data() + co * t_len;
            const double bv = bd[co];
            for (std::size_t t = 0; t < t_len; ++t) yr[t] = bv;
        }
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xr = xd.data() + ci * t_len;
            const double* wr = wd.data() + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) {
                const double wv = wr[co];
                double* yr = yd.data() + co * t_len;
                for (std::size_t t = 0; t < t_len; ++t) yr[t] += wv * xr[t];
            }
        }
    }
    attach(tape, y, {x, w, bias});
    if (tape) {
        tape->record([x, w, bias, y, cin, cout, t_len]() mutable {
            auto gy = y.grad(); auto gx = x.grad(); auto gw = w.grad(); auto gb = bias.grad();
            auto xv = x.data(); auto wv = w.data();
            for (std::size_t co = 0; co < cout; ++co) {
                const double* gyr = gy.data() + co * t_len;
                double acc = 0.0;
                for (std::size_t t = 0; t < t_len; ++t) acc += gyr[t];
                gb[co] += acc;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* xr = xv.data() + ci * t_len;
                const double* wr = wv.data() + ci * cout;
                double* gxr = gx.data() + ci * t_len;
                double* gwr = gw.data() + ci * cout;
                for (std::size_t co = 0; co < cout; ++co) {
                    const double* gyr = gy.data() + co * t_len;
                    const double wc = wr[co];
                    double gw_acc = 0.0;
                    for (std::size_t t = 0; t < t_len; ++t) {
                        gxr[t] += wc * gyr[t];
                        gw_acc += xr[t] * gyr[t];
                    }
                    gwr[co] += gw_acc;
                }
            }
        });
    }
    return y;
}

Tensor downsample_time(Tape* tape, const Tensor& x, std::size_t stride) {
    require(x.rank() == 2, "downsample_time: input must be [channels, T]");
    require(stride >= 1, "downsample_time: stride must be >= 1");
    const std::size_t ch = x.shape()[0];
    const std::size_t t_len = x.shape()[1];
    require(t_len % stride == 0, "downsample_time: T=" + std::to_string(t_len) +
                                 " not divisible by stride " + std::to_string(stride));
    const std::size_t t_out = t_len / stride;

    Tensor y = Tensor::zeros({ch, t_out});
    {
        auto xd = x.data(); auto yd = y.data();
        for (std::size_t c = 0; c < ch; ++c) {
            const double* xr = xd.data() + c * t_len;
            double* yr = yd.data() + c * t_out;
            for (std::size_t t = 0; t < t_out; ++t) yr[t] = xr[t * stride];
        }
    }
    attach(tape, y, {x});
    if (tape) {
        tape->record([x, y, ch, t_len, t_out, stride]() mutable {
            auto gy = y.grad(); auto gx = x.grad();
            for (std::size_t c = 0; c < ch; ++c) {
                const double* gyr = gy.data() + c * t_out;
                double* gxr = gx.data() + c * t_len;
                for (std::size_t t = 0; t < t_out; ++t) gxr[t * stride] += gyr[t];
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// grad_check
// ---------------------------------------------------------------------------

double grad_check(const std::function<Tensor(Tape&)>& loss_fn,
                  std::span<const Tensor> params, double step) {
    require(step > 0.0, "grad_check: step must be positive");
    for (const Tensor& p : params) {
        Tensor t = p;
        t.ensure_grad();
        t.zero_grad();
    }

    Tape tape;
    Tensor loss = loss_fn(tape);
    if (!all_finite(loss)) throw std::runtime_error("grad_check: non-finite loss");
    tape.backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const Tensor& p : params) {
        analytic.emplace_back(p.grad().begin(), p.grad().end());
    }

    auto eval = [&loss_fn]() {
        Tape t;
        const double v = loss_fn(t).value();
        if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
        return v;
    };

    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        auto d = p.data();
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double orig = d[i];
            d[i] = orig + step;
            const double lp = eval();
            d[i] = orig - step;
            const double lm = eval();
            d[i] = orig;
            const double numeric = (lp - lm) / (2.0 * step);
            const double a = analytic[pi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace vdan
