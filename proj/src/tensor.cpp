#include "ifgan/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ifgan {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {
thread_local Precision g_precision = Precision::f64;
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Precision active_precision() { return g_precision; }
void set_active_precision(Precision p) { g_precision = p; }

namespace detail {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void quantize_f32(std::span<double> buf) {
    for (double& v : buf) v = static_cast<double>(static_cast<float>(v));
}

void maybe_quantize(std::span<double> buf) {
    if (g_precision == Precision::f32) quantize_f32(buf);
}

void record(const char* op, std::vector<Tensor> inputs, Tensor& out,
            std::function<void()> backward) {
    Tape* tape = g_active_tape;
    if (!tape) return;
    bool any = false;
    for (const auto& t : inputs) {
        if (t.requires_grad()) {
            any = true;
            break;
        }
    }
    if (!any) return;
    out.set_requires_grad(true);
    tape->push(Tape::Node{std::move(inputs), out, std::move(backward), op});
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->values.assign(static_cast<std::size_t>(numel(t.node_->shape)), 0.0);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.node_->values) v = value;
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel(shape) != static_cast<std::int64_t>(values.size()))
        detail::fail("tensor: " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

double Tensor::item() const {
    if (size() != 1) detail::fail("item() on non-scalar tensor " + shape_str(shape()));
    return node_->values[0];
}

void Tensor::ensure_grad() {
    if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
}

void Tensor::zero_grad() {
    for (double& g : node_->grad) g = 0.0;
}

void Tensor::add_grad(std::span<const double> contribution) {
    ensure_grad();
    auto& g = node_->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
    detail::maybe_quantize(g);
}

Tensor Tensor::detach() const {
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = node_->shape;
    t.node_->values = node_->values;
    t.node_->requires_grad = false;
    return t;
}

Tensor Tensor::clone() const {
    Tensor t = detach();
    t.node_->requires_grad = node_->requires_grad;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : node_->values)
        if (!std::isfinite(v)) return false;
    return true;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) detail::fail("backward: loss must be scalar, got " + shape_str(loss.shape()));
    // reset intermediate grads so replay is repeatable
    for (auto& node : nodes_) {
        auto n = node.output.impl();
        for (double& g : n->grad) g = 0.0;
    }
    Tensor seed = loss;
    seed.ensure_grad();
    seed.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!it->output.has_grad()) continue;  // not on the loss path
        it->backward();
    }
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

}  // namespace ifgan
