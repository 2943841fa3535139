#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ifgan {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Numeric precision of op results. f64 is the default and the mode all
// gradient checks run in; f32 rounds every op output (and gradient
// accumulation) through single precision, emulating a 32-bit training run
// with one code path.
enum class Precision { f64, f32 };

Precision active_precision();
void set_active_precision(Precision p);

struct PrecisionScope {
    explicit PrecisionScope(Precision p) : prev_(active_precision()) { set_active_precision(p); }
    ~PrecisionScope() { set_active_precision(prev_); }
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    Precision prev_;
};

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until first accumulation
};

}  // namespace detail

// Shared handle to an n-d row-major array. Copying a Tensor copies the
// handle, not the buffer; clone() copies data.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t size() const { return static_cast<std::int64_t>(node_->values.size()); }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::int64_t dim(int axis) const { return node_->shape[static_cast<std::size_t>(axis)]; }

    std::span<double> values() { return node_->values; }
    std::span<const double> values() const { return node_->values; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<double> grad() { return node_->grad; }
    std::span<const double> grad() const { return node_->grad; }

    void ensure_grad();
    void zero_grad();

    // Accumulates into grad (allocating if needed), honoring f32 rounding.
    void add_grad(std::span<const double> contribution);

    Tensor detach() const;  // copies values, drops grad and history
    Tensor clone() const;

    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

    // finite-check over values; returns false on any NaN/Inf
    bool all_finite() const;

    detail::TensorNode* impl() const { return node_.get(); }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

// Records the operations of one forward pass in execution order. Replaying
// the backward rules in reverse accumulates gradients into every
// requires_grad tensor reachable from the loss. Owned by a single thread.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Seeds d(loss)/d(loss) = 1 and replays backward rules in reverse.
    // Intermediate gradients are reset first, so repeated calls on the same
    // tape are bit-identical given identical leaf gradients on entry.
    void backward(const Tensor& loss);

    static Tape* active();

    struct Node {
        std::vector<Tensor> inputs;
        Tensor output;
        std::function<void()> backward;
        const char* op;
    };

    void push(Node node) { nodes_.push_back(std::move(node)); }
    const std::vector<Node>& nodes() const { return nodes_; }

private:
    std::vector<Node> nodes_;
};

struct TapeScope {
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

namespace detail {

// Marks `out` as requiring grad and records a backward rule when a tape is
// active and any input requires grad; otherwise a no-op.
void record(const char* op, std::vector<Tensor> inputs, Tensor& out,
            std::function<void()> backward);

void quantize_f32(std::span<double> buf);
void maybe_quantize(std::span<double> buf);

[[noreturn]] void fail(const std::string& msg);

}  // namespace detail

}  // namespace ifgan
