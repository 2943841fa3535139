#include <cmath>
#include <vector>

#include "ifgan/ops.hpp"
#include "ifgan/threadpool.hpp"

// conv2d / conv_transpose2d via im2col + small row-major GEMMs. The
// transpose op is built from the same two building blocks conv uses for its
// input gradient, which is what makes the adjoint identity exact.

namespace ifgan::ops {

using detail::fail;
using detail::maybe_quantize;

namespace {

struct ConvGeom {
    std::int64_t c, h, w;    // image
    std::int64_t kh, kw;     // kernel
    std::int64_t oh, ow;     // patch grid
    std::int64_t stride, pad;
};

// col[(c*kh+u)*kw+v, i*ow+j] = src[c, i*s-p+u, j*s-p+v], zero outside
void im2col(const double* src, const ConvGeom& g, double* col) {
    const std::int64_t npatch = g.oh * g.ow;
    for (std::int64_t c = 0; c < g.c; ++c)
        for (std::int64_t u = 0; u < g.kh; ++u)
            for (std::int64_t v = 0; v < g.kw; ++v) {
                double* row = col + ((c * g.kh + u) * g.kw + v) * npatch;
                for (std::int64_t i = 0; i < g.oh; ++i) {
                    const std::int64_t ii = i * g.stride - g.pad + u;
                    if (ii < 0 || ii >= g.h) {
                        for (std::int64_t j = 0; j < g.ow; ++j) row[i * g.ow + j] = 0.0;
                        continue;
                    }
                    const double* srow = src + (c * g.h + ii) * g.w;
                    for (std::int64_t j = 0; j < g.ow; ++j) {
                        const std::int64_t jj = j * g.stride - g.pad + v;
                        row[i * g.ow + j] = (jj < 0 || jj >= g.w) ? 0.0 : srow[jj];
                    }
                }
            }
}

// adjoint of im2col: dst[c, i*s-p+u, j*s-p+v] += col[(c*kh+u)*kw+v, i*ow+j]
void col2im_acc(const double* col, const ConvGeom& g, double* dst) {
    const std::int64_t npatch = g.oh * g.ow;
    for (std::int64_t c = 0; c < g.c; ++c)
        for (std::int64_t u = 0; u < g.kh; ++u)
            for (std::int64_t v = 0; v < g.kw; ++v) {
                const double* row = col + ((c * g.kh + u) * g.kw + v) * npatch;
                for (std::int64_t i = 0; i < g.oh; ++i) {
                    const std::int64_t ii = i * g.stride - g.pad + u;
                    if (ii < 0 || ii >= g.h) continue;
                    double* drow = dst + (c * g.h + ii) * g.w;
                    for (std::int64_t j = 0; j < g.ow; ++j) {
                        const std::int64_t jj = j * g.stride - g.pad + v;
                        if (jj >= 0 && jj < g.w) drow[jj] += row[i * g.ow + j];
                    }
                }
            }
}

// C[m,n] += A[m,k] . B[k,n]
void gemm_nn(std::int64_t m, std::int64_t k, std::int64_t n, const double* a, const double* b,
             double* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

// C[m,n] += A[m,k] . B[n,k]^T
void gemm_nt(std::int64_t m, std::int64_t k, std::int64_t n, const double* a, const double* b,
             double* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

// C[m,n] += A[k,m]^T . B[k,n]
void gemm_tn(std::int64_t m, std::int64_t k, std::int64_t n, const double* a, const double* b,
             double* c) {
    for (std::int64_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::int64_t i = 0; i < m; ++i) {
            const double api = arow[i];
            if (api == 0.0) continue;
            double* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4) fail("conv2d: expects x[B,Cin,H,W], w[Cout,Cin,kh,kw]");
    if (stride < 1) fail("conv2d: stride must be positive, got " + std::to_string(stride));
    if (pad < 0) fail("conv2d: negative padding");
    const std::int64_t b = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != cin)
        fail("conv2d: input channels " + std::to_string(cin) + " do not match kernel channels " +
             std::to_string(w.dim(1)));
    if (bias.rank() != 1 || bias.dim(0) != cout) fail("conv2d: bias must be [Cout]");
    if (h + 2 * pad < kh || wd + 2 * pad < kw)
        fail("conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
             shape_str(x.shape()));
    const std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::int64_t ow = (wd + 2 * pad - kw) / stride + 1;
    const ConvGeom geom{cin, h, wd, kh, kw, oh, ow, stride, pad};
    const std::int64_t ck = cin * kh * kw, npatch = oh * ow;

    Tensor out = Tensor::zeros({b, cout, oh, ow});
    const double* xv = x.values().data();
    const double* wv = w.values().data();
    const double* bv = bias.values().data();
    double* ov = out.values().data();
    parallel_for(b, [&](std::int64_t s) {
        std::vector<double> col(static_cast<std::size_t>(ck * npatch));
        im2col(xv + s * cin * h * wd, geom, col.data());
        double* dst = ov + s * cout * npatch;
        for (std::int64_t oc = 0; oc < cout; ++oc)
            for (std::int64_t p = 0; p < npatch; ++p) dst[oc * npatch + p] = bv[oc];
        gemm_nn(cout, ck, npatch, wv, col.data(), dst);
    });
    maybe_quantize(out.values());

    detail::record("conv2d", {x, w, bias}, out, [x, w, bias, out, geom, b, cout, ck, npatch]() {
        auto gy = out.grad();
        const double* wv = w.values().data();
        const double* xv = x.values().data();
        const bool need_dx = x.requires_grad();
        const bool need_dw = w.requires_grad();
        const bool need_db = bias.requires_grad();
        std::vector<double> dx(need_dx ? static_cast<std::size_t>(x.size()) : 0, 0.0);
        std::vector<double> dw(need_dw ? static_cast<std::size_t>(w.size()) : 0, 0.0);
        std::vector<double> db(need_db ? static_cast<std::size_t>(cout) : 0, 0.0);
        std::vector<double> col(static_cast<std::size_t>(ck * npatch));
        std::vector<double> dcol(static_cast<std::size_t>(ck * npatch));
        for (std::int64_t s = 0; s < b; ++s) {
            const double* gyb = gy.data() + s * cout * npatch;
            if (need_dx) {
                std::fill(dcol.begin(), dcol.end(), 0.0);
                gemm_tn(ck, cout, npatch, wv, gyb, dcol.data());
                col2im_acc(dcol.data(), geom, dx.data() + s * geom.c * geom.h * geom.w);
            }
            if (need_dw) {
                im2col(xv + s * geom.c * geom.h * geom.w, geom, col.data());
                gemm_nt(cout, npatch, ck, gyb, col.data(), dw.data());
            }
            if (need_db)
                for (std::int64_t oc = 0; oc < cout; ++oc)
                    for (std::int64_t p = 0; p < npatch; ++p) db[static_cast<std::size_t>(oc)] += gyb[oc * npatch + p];
        }
        if (need_dx) Tensor(x).add_grad(dx);
        if (need_dw) {
            if (backward_mutation_enabled())
                for (double& v : dw) v *= 1.001;
            Tensor(w).add_grad(dw);
        }
        if (need_db) Tensor(bias).add_grad(db);
    });
    return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4)
        fail("conv_transpose2d: expects x[B,Cin,H,W], w[Cin,Cout,kh,kw]");
    if (stride < 1) fail("conv_transpose2d: stride must be positive, got " + std::to_string(stride));
    if (pad < 0) fail("conv_transpose2d: negative padding");
    const std::int64_t b = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::int64_t cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(0) != cin)
        fail("conv_transpose2d: input channels " + std::to_string(cin) +
             " do not match kernel channels " + std::to_string(w.dim(0)));
    const std::int64_t oh = (h - 1) * stride - 2 * pad + kh;
    const std::int64_t ow = (wd - 1) * stride - 2 * pad + kw;
    if (oh < 1 || ow < 1)
        fail("conv_transpose2d: output extent would be empty for input " + shape_str(x.shape()));
    // geometry of the adjoint conv: image = the (larger) output, patches = x positions
    const ConvGeom geom{cout, oh, ow, kh, kw, h, wd, stride, pad};
    const std::int64_t ck = cout * kh * kw, npatch = h * wd;

    Tensor out = Tensor::zeros({b, cout, oh, ow});
    const double* xv = x.values().data();
    const double* wv = w.values().data();
    double* ov = out.values().data();
    parallel_for(b, [&](std::int64_t s) {
        std::vector<double> col(static_cast<std::size_t>(ck * npatch), 0.0);
        // col = w^T[ck, cin] . x[b][cin, npatch]
        gemm_tn(ck, cin, npatch, wv, xv + s * cin * npatch, col.data());
        col2im_acc(col.data(), geom, ov + s * cout * oh * ow);
    });
    maybe_quantize(out.values());

    detail::record("conv_transpose2d", {x, w}, out, [x, w, out, geom, b, cin, ck, npatch]() {
        auto gy = out.grad();
        const double* wv = w.values().data();
        const double* xv = x.values().data();
        const bool need_dx = x.requires_grad();
        const bool need_dw = w.requires_grad();
        std::vector<double> dx(need_dx ? static_cast<std::size_t>(x.size()) : 0, 0.0);
        std::vector<double> dw(need_dw ? static_cast<std::size_t>(w.size()) : 0, 0.0);
        std::vector<double> gcol(static_cast<std::size_t>(ck * npatch));
        for (std::int64_t s = 0; s < b; ++s) {
            im2col(gy.data() + s * geom.c * geom.h * geom.w, geom, gcol.data());
            // dx[b][cin, npatch] += w[cin, ck] . gcol[ck, npatch]
            if (need_dx) gemm_nn(cin, ck, npatch, wv, gcol.data(), dx.data() + s * cin * npatch);
            // dw[cin, ck] += x[b][cin, npatch] . gcol[ck, npatch]^T
            if (need_dw) gemm_nt(cin, npatch, ck, xv + s * cin * npatch, gcol.data(), dw.data());
        }
        if (need_dx) Tensor(x).add_grad(dx);
        if (need_dw) Tensor(w).add_grad(dw);
    });
    return out;
}

}  // namespace ifgan::ops
