#include "ifgan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ifgan::ops {

using detail::fail;
using detail::maybe_quantize;

namespace {

bool g_mutate_backward = false;

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
}

Tensor make_out(Shape shape) { return Tensor::zeros(std::move(shape)); }

}  // namespace

void set_backward_mutation(bool enabled) { g_mutate_backward = enabled; }
bool backward_mutation_enabled() { return g_mutate_backward; }

EwKind parse_ew_kind(const std::string& name) {
    if (name == "add") return EwKind::add;
    if (name == "sub") return EwKind::sub;
    if (name == "mul") return EwKind::mul;
    if (name == "neg") return EwKind::neg;
    if (name == "abs") return EwKind::abs;
    if (name == "tanh") return EwKind::tanh;
    if (name == "sigmoid") return EwKind::sigmoid;
    if (name == "relu") return EwKind::relu;
    if (name == "leaky_relu") return EwKind::leaky_relu;
    fail("elementwise: unknown op-kind '" + name + "'");
}

const char* ew_kind_name(EwKind kind) {
    switch (kind) {
        case EwKind::add: return "add";
        case EwKind::sub: return "sub";
        case EwKind::mul: return "mul";
        case EwKind::neg: return "neg";
        case EwKind::abs: return "abs";
        case EwKind::tanh: return "tanh";
        case EwKind::sigmoid: return "sigmoid";
        case EwKind::relu: return "relu";
        case EwKind::leaky_relu: return "leaky_relu";
    }
    return "?";
}

bool ew_kind_is_binary(EwKind kind) {
    return kind == EwKind::add || kind == EwKind::sub || kind == EwKind::mul;
}

namespace {

Tensor binary_op(EwKind kind, const Tensor& a, const Tensor& b) {
    const bool scalar_b = b.size() == 1;
    if (!scalar_b) check_same_shape(ew_kind_name(kind), a, b);
    Tensor out = make_out(a.shape());
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    const std::size_t n = av.size();
    switch (kind) {
        case EwKind::add:
            for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] + bv[scalar_b ? 0 : i];
            break;
        case EwKind::sub:
            for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] - bv[scalar_b ? 0 : i];
            break;
        case EwKind::mul:
            for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] * bv[scalar_b ? 0 : i];
            break;
        default: fail("binary_op: bad kind");
    }
    maybe_quantize(ov);
    detail::record(ew_kind_name(kind), {a, b}, out, [kind, a, b, out, scalar_b]() {
        auto gy = out.grad();
        const std::size_t n = gy.size();
        if (a.requires_grad()) {
            std::vector<double> da(n);
            if (kind == EwKind::mul) {
                auto bv = b.values();
                for (std::size_t i = 0; i < n; ++i) da[i] = gy[i] * bv[scalar_b ? 0 : i];
            } else {
                for (std::size_t i = 0; i < n; ++i) da[i] = gy[i];
            }
            Tensor(a).add_grad(da);
        }
        if (b.requires_grad()) {
            std::vector<double> db(static_cast<std::size_t>(b.size()), 0.0);
            auto av = a.values();
            for (std::size_t i = 0; i < n; ++i) {
                double g = gy[i];
                if (kind == EwKind::sub) g = -g;
                else if (kind == EwKind::mul) g *= av[i];
                db[scalar_b ? 0 : i] += g;
            }
            Tensor(b).add_grad(db);
        }
    });
    return out;
}

Tensor unary_op(EwKind kind, const Tensor& a, double slope) {
    Tensor out = make_out(a.shape());
    auto av = a.values();
    auto ov = out.values();
    const std::size_t n = av.size();
    switch (kind) {
        case EwKind::neg:
            for (std::size_t i = 0; i < n; ++i) ov[i] = -av[i];
            break;
        case EwKind::abs:
            for (std::size_t i = 0; i < n; ++i) ov[i] = std::fabs(av[i]);
            break;
        case EwKind::tanh:
            for (std::size_t i = 0; i < n; ++i) ov[i] = std::tanh(av[i]);
            break;
        case EwKind::sigmoid:
            for (std::size_t i = 0; i < n; ++i) ov[i] = 1.0 / (1.0 + std::exp(-av[i]));
            break;
        case EwKind::relu:
            for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] > 0.0 ? av[i] : 0.0;
            break;
        case EwKind::leaky_relu:
            for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] > 0.0 ? av[i] : slope * av[i];
            break;
        default: fail("unary_op: bad kind");
    }
    maybe_quantize(ov);
    detail::record(ew_kind_name(kind), {a}, out, [kind, a, out, slope]() {
        if (!a.requires_grad()) return;
        auto gy = out.grad();
        auto av = a.values();
        auto yv = out.values();
        const std::size_t n = gy.size();
        std::vector<double> da(n);
        switch (kind) {
            case EwKind::neg:
                for (std::size_t i = 0; i < n; ++i) da[i] = -gy[i];
                break;
            case EwKind::abs:
                // subgradient 0 at the kink
                for (std::size_t i = 0; i < n; ++i)
                    da[i] = av[i] > 0.0 ? gy[i] : (av[i] < 0.0 ? -gy[i] : 0.0);
                break;
            case EwKind::tanh:
                for (std::size_t i = 0; i < n; ++i) da[i] = gy[i] * (1.0 - yv[i] * yv[i]);
                break;
            case EwKind::sigmoid:
                for (std::size_t i = 0; i < n; ++i) da[i] = gy[i] * yv[i] * (1.0 - yv[i]);
                break;
            case EwKind::relu:
                for (std::size_t i = 0; i < n; ++i) da[i] = av[i] > 0.0 ? gy[i] : 0.0;
                break;
            case EwKind::leaky_relu:
                for (std::size_t i = 0; i < n; ++i) da[i] = av[i] > 0.0 ? gy[i] : slope * gy[i];
                break;
            default: return;
        }
        Tensor(a).add_grad(da);
    });
    return out;
}

}  // namespace

Tensor elementwise(EwKind kind, const Tensor& a, const Tensor* b, double leaky_slope) {
    if (ew_kind_is_binary(kind)) {
        if (!b) fail(std::string(ew_kind_name(kind)) + ": second operand required");
        return binary_op(kind, a, *b);
    }
    if (b) fail(std::string(ew_kind_name(kind)) + ": takes one operand");
    return unary_op(kind, a, leaky_slope);
}

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(EwKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(EwKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(EwKind::mul, a, b); }
Tensor neg(const Tensor& a) { return unary_op(EwKind::neg, a, 0); }
Tensor abs(const Tensor& a) { return unary_op(EwKind::abs, a, 0); }
Tensor tanh(const Tensor& a) { return unary_op(EwKind::tanh, a, 0); }
Tensor sigmoid(const Tensor& a) { return unary_op(EwKind::sigmoid, a, 0); }
Tensor relu(const Tensor& a) { return unary_op(EwKind::relu, a, 0); }
Tensor leaky_relu(const Tensor& a, double slope) { return unary_op(EwKind::leaky_relu, a, slope); }

Tensor scale(const Tensor& a, double c) {
    Tensor out = make_out(a.shape());
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < av.size(); ++i) ov[i] = c * av[i];
    maybe_quantize(ov);
    detail::record("scale", {a}, out, [a, out, c]() {
        if (!a.requires_grad()) return;
        auto gy = out.grad();
        std::vector<double> da(gy.size());
        for (std::size_t i = 0; i < gy.size(); ++i) da[i] = c * gy[i];
        Tensor(a).add_grad(da);
    });
    return out;
}

Tensor bias_add(const Tensor& x, const Tensor& bias, int axis) {
    if (axis < 0 || axis >= x.rank()) fail("bias_add: axis out of range");
    const std::int64_t c = x.dim(axis);
    if (bias.rank() != 1 || bias.dim(0) != c)
        fail("bias_add: bias " + shape_str(bias.shape()) + " does not match axis extent " +
             std::to_string(c));
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);

    Tensor out = make_out(x.shape());
    auto xv = x.values();
    auto bv = bias.values();
    auto ov = out.values();
    std::size_t idx = 0;
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t ch = 0; ch < c; ++ch)
            for (std::int64_t i = 0; i < inner; ++i, ++idx) ov[idx] = xv[idx] + bv[static_cast<std::size_t>(ch)];
    maybe_quantize(ov);
    detail::record("bias_add", {x, bias}, out, [x, bias, out, outer, c, inner]() {
        auto gy = out.grad();
        if (x.requires_grad()) Tensor(x).add_grad(gy);
        if (bias.requires_grad()) {
            std::vector<double> db(static_cast<std::size_t>(c), 0.0);
            std::size_t idx = 0;
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t ch = 0; ch < c; ++ch)
                    for (std::int64_t i = 0; i < inner; ++i, ++idx) db[static_cast<std::size_t>(ch)] += gy[idx];
            Tensor(bias).add_grad(db);
        }
    });
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) fail("matmul: expects rank-2 tensors");
    const std::int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        fail("matmul: inner extents disagree " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
    Tensor out = make_out({m, n});
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* ov = out.values().data();
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = bv + p * n;
            double* orow = ov + i * n;
            for (std::int64_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    maybe_quantize(out.values());
    detail::record("matmul", {a, b}, out, [a, b, out, m, k, n]() {
        auto gy = out.grad();
        if (a.requires_grad()) {
            // dA = dC . B^T
            std::vector<double> da(static_cast<std::size_t>(m * k), 0.0);
            auto bv = b.values();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) {
                    const double g = gy[static_cast<std::size_t>(i * n + j)];
                    for (std::int64_t p = 0; p < k; ++p)
                        da[static_cast<std::size_t>(i * k + p)] += g * bv[static_cast<std::size_t>(p * n + j)];
                }
            Tensor(a).add_grad(da);
        }
        if (b.requires_grad()) {
            // dB = A^T . dC
            std::vector<double> db(static_cast<std::size_t>(k * n), 0.0);
            auto av = a.values();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t p = 0; p < k; ++p) {
                    const double aip = av[static_cast<std::size_t>(i * k + p)];
                    for (std::int64_t j = 0; j < n; ++j)
                        db[static_cast<std::size_t>(p * n + j)] += aip * gy[static_cast<std::size_t>(i * n + j)];
                }
            Tensor(b).add_grad(db);
        }
    });
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    return bias_add(matmul(x, w), bias, 1);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) fail("concat: no operands");
    const int rank = parts[0].rank();
    if (axis < 0 || axis >= rank) fail("concat: axis out of range");
    Shape out_shape = parts[0].shape();
    std::int64_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != rank) fail("concat: rank mismatch");
        for (int d = 0; d < rank; ++d) {
            if (d == axis) continue;
            if (p.dim(d) != parts[0].dim(d))
                fail("concat: operands disagree on axis " + std::to_string(d) + ": " +
                     shape_str(p.shape()) + " vs " + shape_str(parts[0].shape()));
        }
        axis_total += p.dim(axis);
    }
    out_shape[static_cast<std::size_t>(axis)] = axis_total;

    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= parts[0].dim(d);
    for (int d = axis + 1; d < rank; ++d) inner *= parts[0].dim(d);

    Tensor out = make_out(out_shape);
    auto ov = out.values();
    std::int64_t offset = 0;
    for (const auto& p : parts) {
        auto pv = p.values();
        const std::int64_t chunk = p.dim(axis) * inner;
        for (std::int64_t o = 0; o < outer; ++o)
            std::copy_n(pv.data() + o * chunk, chunk, ov.data() + o * axis_total * inner + offset * inner);
        offset += p.dim(axis);
    }
    maybe_quantize(ov);
    detail::record("concat", parts, out, [parts, out, outer, inner, axis_total, axis]() {
        auto gy = out.grad();
        std::int64_t offset = 0;
        for (const auto& p : parts) {
            const std::int64_t chunk = p.dim(axis) * inner;
            if (p.requires_grad()) {
                std::vector<double> dp(static_cast<std::size_t>(p.size()));
                for (std::int64_t o = 0; o < outer; ++o)
                    std::copy_n(gy.data() + o * axis_total * inner + offset * inner, chunk,
                                dp.data() + o * chunk);
                Tensor(p).add_grad(dp);
            }
            offset += p.dim(axis);
        }
    });
    return out;
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len) {
    if (axis < 0 || axis >= x.rank()) fail("slice: axis out of range");
    if (start < 0 || len < 0 || start + len > x.dim(axis))
        fail("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
             ") exceeds axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape[static_cast<std::size_t>(axis)] = len;
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= x.dim(d);
    for (int d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
    const std::int64_t ax = x.dim(axis);

    Tensor out = make_out(out_shape);
    auto xv = x.values();
    auto ov = out.values();
    for (std::int64_t o = 0; o < outer; ++o)
        std::copy_n(xv.data() + (o * ax + start) * inner, len * inner, ov.data() + o * len * inner);
    maybe_quantize(ov);
    detail::record("slice", {x}, out, [x, out, outer, inner, ax, start, len]() {
        if (!x.requires_grad()) return;
        auto gy = out.grad();
        std::vector<double> dx(static_cast<std::size_t>(x.size()), 0.0);
        for (std::int64_t o = 0; o < outer; ++o)
            std::copy_n(gy.data() + o * len * inner, len * inner, dx.data() + (o * ax + start) * inner);
        Tensor(x).add_grad(dx);
    });
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.size())
        fail("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
    Tensor out = Tensor::from(std::move(shape), {x.values().begin(), x.values().end()});
    detail::record("reshape", {x}, out, [x, out]() {
        if (x.requires_grad()) Tensor(x).add_grad(out.grad());
    });
    return out;
}

Tensor upsample_nearest(const Tensor& x, int factor) {
    if (x.rank() != 4) fail("upsample_nearest: expects [B,C,H,W]");
    if (factor < 1) fail("upsample_nearest: factor must be >= 1");
    const std::int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t oh = h * factor, ow = w * factor;
    Tensor out = make_out({b, c, oh, ow});
    auto xv = x.values();
    auto ov = out.values();
    for (std::int64_t bc = 0; bc < b * c; ++bc) {
        const double* src = xv.data() + bc * h * w;
        double* dst = ov.data() + bc * oh * ow;
        for (std::int64_t i = 0; i < oh; ++i)
            for (std::int64_t j = 0; j < ow; ++j) dst[i * ow + j] = src[(i / factor) * w + (j / factor)];
    }
    maybe_quantize(ov);
    detail::record("upsample_nearest", {x}, out, [x, out, b, c, h, w, factor]() {
        if (!x.requires_grad()) return;
        const std::int64_t oh = h * factor, ow = w * factor;
        auto gy = out.grad();
        std::vector<double> dx(static_cast<std::size_t>(x.size()), 0.0);
        for (std::int64_t bc = 0; bc < b * c; ++bc) {
            const double* src = gy.data() + bc * oh * ow;
            double* dst = dx.data() + bc * h * w;
            for (std::int64_t i = 0; i < oh; ++i)
                for (std::int64_t j = 0; j < ow; ++j) dst[(i / factor) * w + (j / factor)] += src[i * ow + j];
        }
        Tensor(x).add_grad(dx);
    });
    return out;
}

Tensor avgpool(const Tensor& x, int k) {
    if (x.rank() != 4) fail("avgpool: expects [B,C,H,W]");
    if (k < 1) fail("avgpool: k must be >= 1");
    const std::int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % k != 0) fail("avgpool: axis 2 extent " + std::to_string(h) + " not divisible by " + std::to_string(k));
    if (w % k != 0) fail("avgpool: axis 3 extent " + std::to_string(w) + " not divisible by " + std::to_string(k));
    const std::int64_t oh = h / k, ow = w / k;
    const double inv = 1.0 / (static_cast<double>(k) * k);
    Tensor out = make_out({b, c, oh, ow});
    auto xv = x.values();
    auto ov = out.values();
    for (std::int64_t bc = 0; bc < b * c; ++bc) {
        const double* src = xv.data() + bc * h * w;
        double* dst = ov.data() + bc * oh * ow;
        for (std::int64_t i = 0; i < oh; ++i)
            for (std::int64_t j = 0; j < ow; ++j) {
                double s = 0.0;
                for (int u = 0; u < k; ++u)
                    for (int v = 0; v < k; ++v) s += src[(i * k + u) * w + (j * k + v)];
                dst[i * ow + j] = s * inv;
            }
    }
    maybe_quantize(ov);
    detail::record("avgpool", {x}, out, [x, out, b, c, h, w, k, inv]() {
        if (!x.requires_grad()) return;
        const std::int64_t oh = h / k, ow = w / k;
        auto gy = out.grad();
        std::vector<double> dx(static_cast<std::size_t>(x.size()), 0.0);
        for (std::int64_t bc = 0; bc < b * c; ++bc) {
            const double* src = gy.data() + bc * oh * ow;
            double* dst = dx.data() + bc * h * w;
            for (std::int64_t i = 0; i < oh; ++i)
                for (std::int64_t j = 0; j < ow; ++j) {
                    const double g = src[i * ow + j] * inv;
                    for (int u = 0; u < k; ++u)
                        for (int v = 0; v < k; ++v) dst[(i * k + u) * w + (j * k + v)] += g;
                }
        }
        Tensor(x).add_grad(dx);
    });
    return out;
}

Tensor mean(const Tensor& x, std::vector<int> axes) {
    const int rank = x.rank();
    if (axes.empty())
        for (int d = 0; d < rank; ++d) axes.push_back(d);
    std::sort(axes.begin(), axes.end());
    axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
    for (int a : axes)
        if (a < 0 || a >= rank) fail("mean: axis " + std::to_string(a) + " out of range");

    std::vector<bool> reduced(static_cast<std::size_t>(rank), false);
    for (int a : axes) reduced[static_cast<std::size_t>(a)] = true;
    Shape out_shape;
    std::int64_t count = 1;
    for (int d = 0; d < rank; ++d) {
        if (reduced[static_cast<std::size_t>(d)]) count *= x.dim(d);
        else out_shape.push_back(x.dim(d));
    }
    if (out_shape.empty()) out_shape = {1};
    const double inv = 1.0 / static_cast<double>(count);

    // strides of x, and the out-flat-index stride of each non-reduced axis
    std::vector<std::int64_t> xstride(static_cast<std::size_t>(rank), 1);
    for (int d = rank - 2; d >= 0; --d)
        xstride[static_cast<std::size_t>(d)] = xstride[static_cast<std::size_t>(d + 1)] * x.dim(d + 1);
    std::vector<std::int64_t> ostride(static_cast<std::size_t>(rank), 0);
    std::int64_t acc = 1;
    for (int d = rank - 1; d >= 0; --d) {
        if (!reduced[static_cast<std::size_t>(d)]) {
            ostride[static_cast<std::size_t>(d)] = acc;
            acc *= x.dim(d);
        }
    }

    Tensor out = make_out(out_shape);
    auto xv = x.values();
    auto ov = out.values();
    const std::int64_t n = x.size();
    for (std::int64_t flat = 0; flat < n; ++flat) {
        std::int64_t rem = flat, oidx = 0;
        for (int d = 0; d < rank; ++d) {
            const std::int64_t coord = rem / xstride[static_cast<std::size_t>(d)];
            rem %= xstride[static_cast<std::size_t>(d)];
            oidx += coord * ostride[static_cast<std::size_t>(d)];
        }
        ov[static_cast<std::size_t>(oidx)] += xv[static_cast<std::size_t>(flat)] * inv;
    }
    maybe_quantize(ov);
    detail::record("mean", {x}, out, [x, out, xstride, ostride, inv]() {
        if (!x.requires_grad()) return;
        auto gy = out.grad();
        const int rank = x.rank();
        const std::int64_t n = x.size();
        std::vector<double> dx(static_cast<std::size_t>(n));
        for (std::int64_t flat = 0; flat < n; ++flat) {
            std::int64_t rem = flat, oidx = 0;
            for (int d = 0; d < rank; ++d) {
                const std::int64_t coord = rem / xstride[static_cast<std::size_t>(d)];
                rem %= xstride[static_cast<std::size_t>(d)];
                oidx += coord * ostride[static_cast<std::size_t>(d)];
            }
            dx[static_cast<std::size_t>(flat)] = gy[static_cast<std::size_t>(oidx)] * inv;
        }
        Tensor(x).add_grad(dx);
    });
    return out;
}

Tensor pad_zero(const Tensor& x, int pad_h, int pad_w) {
    if (x.rank() != 4) fail("pad_zero: expects [B,C,H,W]");
    if (pad_h < 0 || pad_w < 0) fail("pad_zero: negative padding");
    const std::int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t oh = h + 2 * pad_h, ow = w + 2 * pad_w;
    Tensor out = make_out({b, c, oh, ow});
    auto xv = x.values();
    auto ov = out.values();
    for (std::int64_t bc = 0; bc < b * c; ++bc)
        for (std::int64_t i = 0; i < h; ++i)
            std::copy_n(xv.data() + (bc * h + i) * w, w,
                        ov.data() + (bc * oh + i + pad_h) * ow + pad_w);
    maybe_quantize(ov);
    detail::record("pad_zero", {x}, out, [x, out, b, c, h, w, pad_h, pad_w]() {
        if (!x.requires_grad()) return;
        const std::int64_t oh = h + 2 * pad_h, ow = w + 2 * pad_w;
        auto gy = out.grad();
        std::vector<double> dx(static_cast<std::size_t>(x.size()));
        for (std::int64_t bc = 0; bc < b * c; ++bc)
            for (std::int64_t i = 0; i < h; ++i)
                std::copy_n(gy.data() + (bc * oh + i + pad_h) * ow + pad_w, w,
                            dx.data() + (bc * h + i) * w);
        Tensor(x).add_grad(dx);
    });
    return out;
}

Tensor bce_with_logits_mean(const Tensor& logits, double target) {
    const std::int64_t n = logits.size();
    auto lv = logits.values();
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = lv[static_cast<std::size_t>(i)];
        total += std::max(x, 0.0) - x * target + std::log1p(std::exp(-std::fabs(x)));
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n));
    maybe_quantize(out.values());
    detail::record("bce_with_logits", {logits}, out, [logits, out, target, n]() {
        if (!logits.requires_grad()) return;
        const double g = out.grad()[0] / static_cast<double>(n);
        auto lv = logits.values();
        std::vector<double> dx(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-lv[static_cast<std::size_t>(i)]));
            dx[static_cast<std::size_t>(i)] = g * (s - target);
        }
        Tensor(logits).add_grad(dx);
    });
    return out;
}

Tensor softmax_cross_entropy_mean(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) fail("softmax_cross_entropy: expects [B,K] logits");
    const std::int64_t b = logits.dim(0), k = logits.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != b)
        fail("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
             std::to_string(b));
    for (int l : labels)
        if (l < 0 || l >= k)
            fail("softmax_cross_entropy: label " + std::to_string(l) + " outside [0," +
                 std::to_string(k) + ")");
    auto lv = logits.values();
    double total = 0.0;
    for (std::int64_t i = 0; i < b; ++i) {
        const double* row = lv.data() + i * k;
        double m = row[0];
        for (std::int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        double se = 0.0;
        for (std::int64_t j = 0; j < k; ++j) se += std::exp(row[j] - m);
        total += m + std::log(se) - row[labels[static_cast<std::size_t>(i)]];
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(b));
    maybe_quantize(out.values());
    detail::record("softmax_xent", {logits}, out, [logits, out, labels, b, k]() {
        if (!logits.requires_grad()) return;
        const double g = out.grad()[0] / static_cast<double>(b);
        auto lv = logits.values();
        std::vector<double> dx(static_cast<std::size_t>(b * k));
        for (std::int64_t i = 0; i < b; ++i) {
            const double* row = lv.data() + i * k;
            double m = row[0];
            for (std::int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
            double se = 0.0;
            for (std::int64_t j = 0; j < k; ++j) se += std::exp(row[j] - m);
            for (std::int64_t j = 0; j < k; ++j) {
                double p = std::exp(row[j] - m) / se;
                if (j == labels[static_cast<std::size_t>(i)]) p -= 1.0;
                dx[static_cast<std::size_t>(i * k + j)] = g * p;
            }
        }
        Tensor(logits).add_grad(dx);
    });
    return out;
}

}  // namespace ifgan::ops
