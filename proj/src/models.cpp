#include "ifgan/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ifgan {

namespace {

constexpr double kNormEps = 1e-5;

int stage_width(int base, int stage_index) {  // 0-based, capped at 8*base
    return base * (1 << std::min(stage_index, 3));
}

Tensor cached_zero_bias(std::vector<Tensor>& cache, int width) {
    for (const auto& t : cache)
        if (t.dim(0) == width) return t;
    cache.push_back(Tensor::zeros({width}));
    return cache.back();
}

}  // namespace

// ---------------------------------------------------------------- generator

UNetGenerator::UNetGenerator(const GeneratorDesc& desc, const std::string& prefix,
                             ParamStore& params, Rng& rng)
    : desc_(desc) {
    if (desc.depth < 1) throw std::invalid_argument("generator: depth must be >= 1");
    const int c = desc.channels;
    int in_ch = 2 * c;
    for (int k = 0; k < desc.depth; ++k) {
        const int out_ch = stage_width(desc.base, k);
        Enc e;
        const std::string name = prefix + ".enc" + std::to_string(k + 1);
        e.w = params.get_or_create(name + ".weight", {out_ch, in_ch, 4, 4}, InitKind::normal_002, rng);
        if (k == 0) {
            e.b = params.get_or_create(name + ".bias", {out_ch}, InitKind::zeros, rng);
        } else {
            e.gamma = params.get_or_create(name + ".gamma", {out_ch}, InitKind::ones_jitter, rng);
            e.beta = params.get_or_create(name + ".beta", {out_ch}, InitKind::zeros, rng);
        }
        enc_.push_back(e);
        in_ch = out_ch;
    }
    for (int k = 0; k < desc.depth; ++k) {
        const bool last = k == desc.depth - 1;
        const int out_ch = last ? c : stage_width(desc.base, desc.depth - 2 - k);
        Dec d;
        const std::string name = prefix + ".dec" + std::to_string(k + 1);
        d.w = params.get_or_create(name + ".weight", {in_ch, out_ch, 4, 4}, InitKind::normal_002, rng);
        if (last) {
            d.out_bias = params.get_or_create(name + ".bias", {out_ch}, InitKind::zeros, rng);
        } else {
            d.gamma = params.get_or_create(name + ".gamma", {out_ch}, InitKind::ones_jitter, rng);
            d.beta = params.get_or_create(name + ".beta", {out_ch}, InitKind::zeros, rng);
        }
        dec_.push_back(d);
        // after concat with the mirrored encoder stage
        in_ch = last ? out_ch : 2 * out_ch;
    }
}

Tensor UNetGenerator::zero_bias(int width) const { return cached_zero_bias(zero_biases_, width); }

Tensor UNetGenerator::forward(const Tensor& i_an, const Tensor& i_se, bool training) const {
    (void)training;  // no dropout by default; generator norms are instance mode
    if (i_an.shape() != i_se.shape())
        throw std::invalid_argument("generator: input shapes differ, " + shape_str(i_an.shape()) +
                                    " vs " + shape_str(i_se.shape()));
    const std::int64_t div = std::int64_t{1} << desc_.depth;
    if (i_an.rank() != 4 || i_an.dim(2) % div != 0 || i_an.dim(3) % div != 0)
        throw std::invalid_argument("generator: spatial extents of " + shape_str(i_an.shape()) +
                                    " must be divisible by " + std::to_string(div));

    Tensor x = ops::concat({i_an, i_se}, 1);
    std::vector<Tensor> skips;
    for (std::size_t k = 0; k < enc_.size(); ++k) {
        const Enc& e = enc_[k];
        x = ops::conv2d(x, e.w, e.b.defined() ? e.b : zero_bias(static_cast<int>(e.w.dim(0))), 2, 1);
        if (e.gamma.defined())
            x = ops::norm2d(x, e.gamma, e.beta, ops::NormMode::instance, kNormEps, training);
        x = ops::leaky_relu(x, 0.2);
        skips.push_back(x);
    }
    for (std::size_t k = 0; k < dec_.size(); ++k) {
        const Dec& d = dec_[k];
        x = ops::conv_transpose2d(x, d.w, 2, 1);
        if (k + 1 < dec_.size()) {
            x = ops::norm2d(x, d.gamma, d.beta, ops::NormMode::instance, kNormEps, training);
            x = ops::relu(x);
            x = ops::concat({x, skips[dec_.size() - 2 - k]}, 1);
        } else {
            x = ops::bias_add(x, d.out_bias, 1);
            x = ops::tanh(x);
        }
    }
    return x;
}

std::int64_t UNetGenerator::param_count(const GeneratorDesc& desc) {
    const int c = desc.channels;
    std::int64_t total = 0;
    int in_ch = 2 * c;
    for (int k = 0; k < desc.depth; ++k) {
        const int out_ch = stage_width(desc.base, k);
        total += static_cast<std::int64_t>(out_ch) * in_ch * 16;
        total += out_ch;                     // bias or beta
        if (k > 0) total += out_ch;          // gamma
        in_ch = out_ch;
    }
    for (int k = 0; k < desc.depth; ++k) {
        const bool last = k == desc.depth - 1;
        const int out_ch = last ? c : stage_width(desc.base, desc.depth - 2 - k);
        total += static_cast<std::int64_t>(in_ch) * out_ch * 16;
        total += out_ch;                     // out bias or beta
        if (!last) total += out_ch;          // gamma
        in_ch = last ? out_ch : 2 * out_ch;
    }
    return total;
}

// ------------------------------------------------------------ discriminator

PatchDiscriminator::PatchDiscriminator(const DiscriminatorDesc& desc, const std::string& prefix,
                                       ParamStore& params, Rng& rng)
    : desc_(desc) {
    if (desc.n_strided < 1) throw std::invalid_argument("discriminator: n_strided must be >= 1");
    const int c = desc.channels;
    int in_ch = 3 * c;
    const int n_layers = desc.n_strided + 2;
    for (int k = 0; k < n_layers; ++k) {
        Layer l;
        const bool is_final = k == n_layers - 1;
        const int out_ch = is_final ? 1 : stage_width(desc.base, k);
        l.stride = k < desc.n_strided ? 2 : 1;
        l.act = !is_final;
        const std::string name = prefix + ".conv" + std::to_string(k + 1);
        l.w = params.get_or_create(name + ".weight", {out_ch, in_ch, 4, 4}, InitKind::normal_002, rng);
        if (k == 0 || is_final) {
            l.b = params.get_or_create(name + ".bias", {out_ch}, InitKind::zeros, rng);
        } else {
            l.gamma = params.get_or_create(name + ".gamma", {out_ch}, InitKind::ones_jitter, rng);
            l.beta = params.get_or_create(name + ".beta", {out_ch}, InitKind::zeros, rng);
        }
        layers_.push_back(l);
        in_ch = out_ch;
    }
}

Tensor PatchDiscriminator::zero_bias(int width) const {
    return cached_zero_bias(zero_biases_, width);
}

Tensor PatchDiscriminator::forward(const ConditionTuple& tuple, bool training) const {
    if (tuple.i_an.shape() != tuple.i_se.shape() || tuple.i_an.shape() != tuple.x.shape())
        throw std::invalid_argument("discriminator: tuple members disagree on shape: " +
                                    shape_str(tuple.i_an.shape()) + ", " + shape_str(tuple.i_se.shape()) +
                                    ", " + shape_str(tuple.x.shape()));
    Tensor x = ops::concat({tuple.i_an, tuple.i_se, tuple.x}, 1);
    for (const Layer& l : layers_) {
        x = ops::conv2d(x, l.w, l.b.defined() ? l.b : zero_bias(static_cast<int>(l.w.dim(0))),
                        l.stride, 1);
        if (l.gamma.defined())
            x = ops::norm2d(x, l.gamma, l.beta, ops::NormMode::instance, kNormEps, training);
        if (l.act) x = ops::leaky_relu(x, 0.2);
    }
    return x;
}

std::int64_t PatchDiscriminator::param_count(const DiscriminatorDesc& desc) {
    std::int64_t total = 0;
    int in_ch = 3 * desc.channels;
    const int n_layers = desc.n_strided + 2;
    for (int k = 0; k < n_layers; ++k) {
        const bool is_final = k == n_layers - 1;
        const int out_ch = is_final ? 1 : stage_width(desc.base, k);
        total += static_cast<std::int64_t>(out_ch) * in_ch * 16;
        total += out_ch;                              // bias or beta
        if (k != 0 && !is_final) total += out_ch;     // gamma
        in_ch = out_ch;
    }
    return total;
}

std::int64_t PatchDiscriminator::patch_extent(const DiscriminatorDesc& desc, std::int64_t side) {
    std::int64_t s = side;
    for (int k = 0; k < desc.n_strided; ++k) s = (s + 2 - 4) / 2 + 1;
    for (int k = 0; k < 2; ++k) s = s + 2 - 4 + 1;
    return s;
}

// --------------------------------------------------------------- classifier

ResidualClassifier::NormLayer ResidualClassifier::make_norm(const std::string& name, int width,
                                                            ParamStore& params, ParamStore& buffers,
                                                            Rng& rng) {
    NormLayer n;
    n.gamma = params.get_or_create(name + ".gamma", {width}, InitKind::ones_jitter, rng);
    n.beta = params.get_or_create(name + ".beta", {width}, InitKind::zeros, rng);
    n.stats.running_mean = buffers.get_or_create(name + ".running_mean", {width}, InitKind::zeros, rng);
    n.stats.running_var = buffers.get_or_create(name + ".running_var", {width}, InitKind::ones, rng);
    return n;
}

ResidualClassifier::ResidualClassifier(const ClassifierDesc& desc, const std::string& prefix,
                                       ParamStore& params, ParamStore& buffers, Rng& rng)
    : desc_(desc) {
    if (desc.stages < 1 || desc.blocks < 1)
        throw std::invalid_argument("classifier: stages and blocks must be >= 1");
    const int in_ch = desc.in_images * desc.channels;
    stem_w_ = params.get_or_create(prefix + ".stem.weight", {desc.base, in_ch, 3, 3},
                                   InitKind::normal_002, rng);
    stem_n_ = make_norm(prefix + ".stem.norm", desc.base, params, buffers, rng);

    int width = desc.base;
    for (int s = 0; s < desc.stages; ++s) {
        const int out_w = desc.base * (1 << s);
        std::vector<Block> blocks;
        for (int b = 0; b < desc.blocks; ++b) {
            Block blk;
            blk.stride = (s > 0 && b == 0) ? 2 : 1;
            const int bin = b == 0 ? width : out_w;
            const std::string name =
                prefix + ".s" + std::to_string(s + 1) + "b" + std::to_string(b + 1);
            blk.w1 = params.get_or_create(name + ".conv1.weight", {out_w, bin, 3, 3},
                                          InitKind::normal_002, rng);
            blk.n1 = make_norm(name + ".norm1", out_w, params, buffers, rng);
            blk.w2 = params.get_or_create(name + ".conv2.weight", {out_w, out_w, 3, 3},
                                          InitKind::normal_002, rng);
            blk.n2 = make_norm(name + ".norm2", out_w, params, buffers, rng);
            if (blk.stride != 1 || bin != out_w) {
                blk.down_w = params.get_or_create(name + ".down.weight", {out_w, bin, 1, 1},
                                                  InitKind::normal_002, rng);
                blk.down_n = make_norm(name + ".down.norm", out_w, params, buffers, rng);
            }
            blocks.push_back(blk);
        }
        stages_.push_back(std::move(blocks));
        width = out_w;
    }
    head_w_ = params.get_or_create(prefix + ".head.weight", {width, desc.classes},
                                   InitKind::normal_002, rng);
    head_b_ = params.get_or_create(prefix + ".head.bias", {desc.classes}, InitKind::zeros, rng);
}

Tensor ResidualClassifier::zero_bias(int width) const {
    return cached_zero_bias(zero_biases_, width);
}

Tensor ResidualClassifier::pair_input(const Tensor& i_se, const Tensor& x_ae) {
    if (i_se.shape() != x_ae.shape())
        throw std::invalid_argument("classifier: pair shapes differ, " + shape_str(i_se.shape()) +
                                    " vs " + shape_str(x_ae.shape()));
    return ops::concat({i_se, x_ae}, 1);
}

Tensor ResidualClassifier::forward(const Tensor& x_in, bool training) const {
    const int expect = desc_.in_images * desc_.channels;
    if (x_in.rank() != 4 || x_in.dim(1) != expect)
        throw std::invalid_argument("classifier: expected " + std::to_string(expect) +
                                    " input channels, got " + shape_str(x_in.shape()));
    auto norm = [&](const Tensor& t, const NormLayer& n) {
        return ops::norm2d(t, n.gamma, n.beta, ops::NormMode::batch, kNormEps, training, &n.stats);
    };
    Tensor x = ops::conv2d(x_in, stem_w_, zero_bias(desc_.base), 2, 1);
    x = ops::relu(norm(x, stem_n_));
    for (const auto& stage : stages_) {
        for (const Block& blk : stage) {
            Tensor identity = x;
            Tensor y = ops::conv2d(x, blk.w1, zero_bias(static_cast<int>(blk.w1.dim(0))), blk.stride, 1);
            y = ops::relu(norm(y, blk.n1));
            y = ops::conv2d(y, blk.w2, zero_bias(static_cast<int>(blk.w2.dim(0))), 1, 1);
            y = norm(y, blk.n2);
            if (blk.down_w.defined()) {
                identity = ops::conv2d(x, blk.down_w, zero_bias(static_cast<int>(blk.down_w.dim(0))),
                                       blk.stride, 0);
                identity = norm(identity, blk.down_n);
            }
            x = ops::relu(ops::add(y, identity));
        }
    }
    Tensor pooled = ops::mean(x, {2, 3});  // [B, width]
    return ops::linear(pooled, head_w_, head_b_);
}

std::int64_t ResidualClassifier::param_count(const ClassifierDesc& desc) {
    const int in_ch = desc.in_images * desc.channels;
    std::int64_t total = static_cast<std::int64_t>(desc.base) * in_ch * 9 + 2 * desc.base;
    int width = desc.base;
    for (int s = 0; s < desc.stages; ++s) {
        const int out_w = desc.base * (1 << s);
        for (int b = 0; b < desc.blocks; ++b) {
            const int bin = b == 0 ? width : out_w;
            total += static_cast<std::int64_t>(out_w) * bin * 9 + 2 * out_w;   // conv1 + norm1
            total += static_cast<std::int64_t>(out_w) * out_w * 9 + 2 * out_w; // conv2 + norm2
            const bool down = (s > 0 && b == 0) || bin != out_w;
            if (down) total += static_cast<std::int64_t>(out_w) * bin + 2 * out_w;
        }
        width = out_w;
    }
    total += static_cast<std::int64_t>(width) * desc.classes + desc.classes;
    return total;
}

}  // namespace ifgan
