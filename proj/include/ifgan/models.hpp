#pragma once

#include <string>
#include <vector>

#include "ifgan/losses.hpp"
#include "ifgan/nn.hpp"
#include "ifgan/ops.hpp"
#include "ifgan/tensor.hpp"

namespace ifgan {

// U-Net generator: depth stride-2 encoder stages mirrored by decoder stages
// with skip concatenation, tanh output in (-1,1). Network input is the
// channel concat of {I_AN, I_SE}.
struct GeneratorDesc {
    int channels = 1;  // C per image
    int base = 16;     // first encoder width
    int depth = 4;     // stride-2 stages; input extent must divide 2^depth
};

// PatchGAN: n_strided stride-2 stages, two stride-1 layers, single-channel
// logit map. Input is the channel concat of the condition tuple.
struct DiscriminatorDesc {
    int channels = 1;
    int base = 16;
    int n_strided = 3;
};

// Residual classifier on a channel-concatenated image pair (in_images=1 for
// the raw-image baseline): stride-2 stem, `stages` residual stages of
// `blocks` basic blocks with widths doubling per stage, global average
// pooling, linear head.
struct ClassifierDesc {
    int in_images = 2;
    int channels = 1;
    int base = 8;
    int stages = 4;
    int blocks = 2;
    int classes = 6;
};

class UNetGenerator {
public:
    UNetGenerator(const GeneratorDesc& desc, const std::string& prefix, ParamStore& params,
                  Rng& rng);

    Tensor forward(const Tensor& i_an, const Tensor& i_se, bool training) const;

    static std::int64_t param_count(const GeneratorDesc& desc);
    const GeneratorDesc& desc() const { return desc_; }

private:
    GeneratorDesc desc_;
    struct Enc {
        Tensor w, b;            // b undefined when followed by norm
        Tensor gamma, beta;     // undefined for the first stage
    };
    struct Dec {
        Tensor w;
        Tensor gamma, beta;     // undefined for the output stage
        Tensor out_bias;        // defined only for the output stage
    };
    std::vector<Enc> enc_;
    std::vector<Dec> dec_;
    Tensor zero_bias(int width) const;
    mutable std::vector<Tensor> zero_biases_;  // per-width cache, non-trainable
};

class PatchDiscriminator {
public:
    PatchDiscriminator(const DiscriminatorDesc& desc, const std::string& prefix, ParamStore& params,
                       Rng& rng);

    Tensor forward(const ConditionTuple& tuple, bool training) const;

    static std::int64_t param_count(const DiscriminatorDesc& desc);
    // spatial extent of the logit map for a square input of the given side
    static std::int64_t patch_extent(const DiscriminatorDesc& desc, std::int64_t side);
    const DiscriminatorDesc& desc() const { return desc_; }

private:
    DiscriminatorDesc desc_;
    struct Layer {
        Tensor w, b;
        Tensor gamma, beta;
        int stride = 1;
        bool act = true;
    };
    std::vector<Layer> layers_;
    Tensor zero_bias(int width) const;
    mutable std::vector<Tensor> zero_biases_;
};

class ResidualClassifier {
public:
    ResidualClassifier(const ClassifierDesc& desc, const std::string& prefix, ParamStore& params,
                       ParamStore& buffers, Rng& rng);

    // x images are channel-concatenated by the caller (see pair_input)
    Tensor forward(const Tensor& x, bool training) const;

    // concat {i_se, x_ae} along channels
    static Tensor pair_input(const Tensor& i_se, const Tensor& x_ae);

    static std::int64_t param_count(const ClassifierDesc& desc);
    const ClassifierDesc& desc() const { return desc_; }

private:
    ClassifierDesc desc_;
    struct NormLayer {
        Tensor gamma, beta;
        mutable ops::Norm2dStats stats;
    };
    struct Block {
        Tensor w1, w2;
        NormLayer n1, n2;
        Tensor down_w;  // 1x1 stride-2 projection, defined when shape changes
        NormLayer down_n;
        int stride = 1;
    };
    Tensor stem_w_;
    NormLayer stem_n_;
    std::vector<std::vector<Block>> stages_;
    Tensor head_w_, head_b_;
    Tensor zero_bias(int width) const;
    mutable std::vector<Tensor> zero_biases_;

    NormLayer make_norm(const std::string& name, int width, ParamStore& params,
                        ParamStore& buffers, Rng& rng);
};

}  // namespace ifgan
