#include <cmath>
#include <vector>

#include "ifgan/ops.hpp"

namespace ifgan::ops {

using detail::fail;
using detail::maybe_quantize;

namespace {

struct Moments {
    std::vector<double> mean;
    std::vector<double> var;  // population variance
};

}  // namespace

Tensor norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, NormMode mode, double eps,
              bool training, Norm2dStats* stats) {
    if (x.rank() != 4) fail("norm2d: expects [B,C,H,W]");
    const std::int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c)
        fail("norm2d: gamma/beta must be [C] with C=" + std::to_string(c));
    if (eps <= 0.0) fail("norm2d: eps must be positive");
    const std::int64_t plane = h * w;

    const bool batch_mode = mode == NormMode::batch;
    if (batch_mode && b * plane < 2)
        fail("norm2d: batch mode needs a population of at least 2 per channel; "
             "use instance mode for single-element planes");

    const std::int64_t groups = batch_mode ? c : b * c;
    const std::int64_t group_n = batch_mode ? b * plane : plane;
    const double inv_n = 1.0 / static_cast<double>(group_n);

    Moments mom;
    mom.mean.assign(static_cast<std::size_t>(groups), 0.0);
    mom.var.assign(static_cast<std::size_t>(groups), 0.0);

    auto xv = x.values();
    const bool use_running = batch_mode && !training;
    if (use_running) {
        if (!stats) fail("norm2d: inference in batch mode requires running stats");
        for (std::int64_t ch = 0; ch < c; ++ch) {
            mom.mean[static_cast<std::size_t>(ch)] = stats->running_mean.values()[static_cast<std::size_t>(ch)];
            mom.var[static_cast<std::size_t>(ch)] = stats->running_var.values()[static_cast<std::size_t>(ch)];
        }
    } else {
        for (std::int64_t g = 0; g < groups; ++g) {
            double s = 0.0;
            if (batch_mode) {
                for (std::int64_t bb = 0; bb < b; ++bb) {
                    const double* p = xv.data() + (bb * c + g) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) s += p[i];
                }
            } else {
                const double* p = xv.data() + g * plane;
                for (std::int64_t i = 0; i < plane; ++i) s += p[i];
            }
            const double mu = s * inv_n;
            double v = 0.0;
            if (batch_mode) {
                for (std::int64_t bb = 0; bb < b; ++bb) {
                    const double* p = xv.data() + (bb * c + g) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) v += (p[i] - mu) * (p[i] - mu);
                }
            } else {
                const double* p = xv.data() + g * plane;
                for (std::int64_t i = 0; i < plane; ++i) v += (p[i] - mu) * (p[i] - mu);
            }
            mom.mean[static_cast<std::size_t>(g)] = mu;
            mom.var[static_cast<std::size_t>(g)] = v * inv_n;
        }
        if (batch_mode && training && stats) {
            auto rm = stats->running_mean.values();
            auto rv = stats->running_var.values();
            const double m = stats->momentum;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                rm[static_cast<std::size_t>(ch)] = (1.0 - m) * rm[static_cast<std::size_t>(ch)] + m * mom.mean[static_cast<std::size_t>(ch)];
                rv[static_cast<std::size_t>(ch)] = (1.0 - m) * rv[static_cast<std::size_t>(ch)] + m * mom.var[static_cast<std::size_t>(ch)];
            }
        }
    }

    Tensor out = Tensor::zeros(x.shape());
    auto gv = gamma.values();
    auto bv = beta.values();
    auto ov = out.values();
    for (std::int64_t bb = 0; bb < b; ++bb)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const std::int64_t g = batch_mode ? ch : bb * c + ch;
            const double mu = mom.mean[static_cast<std::size_t>(g)];
            const double istd = 1.0 / std::sqrt(mom.var[static_cast<std::size_t>(g)] + eps);
            const double ga = gv[static_cast<std::size_t>(ch)], be = bv[static_cast<std::size_t>(ch)];
            const double* p = xv.data() + (bb * c + ch) * plane;
            double* o = ov.data() + (bb * c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) o[i] = ga * (p[i] - mu) * istd + be;
        }
    maybe_quantize(ov);

    const bool stats_are_constants = use_running;
    detail::record("norm2d", {x, gamma, beta}, out,
                   [x, gamma, beta, out, mom, b, c, plane, batch_mode, eps, inv_n,
                    stats_are_constants]() {
        auto gy = out.grad();
        auto xv = x.values();
        auto gv = gamma.values();
        const bool need_dx = x.requires_grad();
        const bool need_dg = gamma.requires_grad();
        const bool need_db = beta.requires_grad();
        std::vector<double> dx(need_dx ? static_cast<std::size_t>(x.size()) : 0, 0.0);
        std::vector<double> dg(need_dg ? static_cast<std::size_t>(c) : 0, 0.0);
        std::vector<double> db(need_db ? static_cast<std::size_t>(c) : 0, 0.0);
        const std::int64_t groups = batch_mode ? c : b * c;
        for (std::int64_t g = 0; g < groups; ++g) {
            const std::int64_t ch = batch_mode ? g : g % c;
            const double mu = mom.mean[static_cast<std::size_t>(g)];
            const double istd = 1.0 / std::sqrt(mom.var[static_cast<std::size_t>(g)] + eps);
            const double ga = gv[static_cast<std::size_t>(ch)];
            // gather group element offsets
            const std::int64_t nb = batch_mode ? b : 1;
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::int64_t k = 0; k < nb; ++k) {
                const std::int64_t base = batch_mode ? (k * c + ch) * plane : g * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    const double xhat = (xv[static_cast<std::size_t>(base + i)] - mu) * istd;
                    const double dy = gy[static_cast<std::size_t>(base + i)];
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat;
                }
            }
            if (need_dg) dg[static_cast<std::size_t>(ch)] += sum_dy_xhat;
            if (need_db) db[static_cast<std::size_t>(ch)] += sum_dy;
            if (need_dx) {
                const double n_inv = batch_mode ? inv_n : 1.0 / static_cast<double>(plane);
                for (std::int64_t k = 0; k < nb; ++k) {
                    const std::int64_t base = batch_mode ? (k * c + ch) * plane : g * plane;
                    for (std::int64_t i = 0; i < plane; ++i) {
                        const double xhat = (xv[static_cast<std::size_t>(base + i)] - mu) * istd;
                        const double dy = gy[static_cast<std::size_t>(base + i)];
                        double d;
                        if (stats_are_constants) {
                            d = dy * ga * istd;
                        } else {
                            d = ga * istd * (dy - n_inv * sum_dy - xhat * n_inv * sum_dy_xhat);
                        }
                        dx[static_cast<std::size_t>(base + i)] += d;
                    }
                }
            }
        }
        if (need_dx) Tensor(x).add_grad(dx);
        if (need_dg) Tensor(gamma).add_grad(dg);
        if (need_db) Tensor(beta).add_grad(db);
    });
    return out;
}

}  // namespace ifgan::ops
