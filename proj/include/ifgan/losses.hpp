#pragma once

#include <vector>

#include "ifgan/tensor.hpp"

namespace ifgan {

struct LossWeights {
    double lambda1 = 1.0;    // adversarial
    double lambda2 = 200.0;  // L1
    double lambda3 = 50.0;   // expression
};

// {I_AN, I_SE, X} with X either the real average-expressive face or the
// generator output; is_real carries the discriminator target.
struct ConditionTuple {
    Tensor i_an;
    Tensor i_se;
    Tensor x;
    bool is_real = false;
};

// stable-BCE discriminator loss: mean BCE(real,1) + mean BCE(fake,0).
// Fake logits must come from a detached generator output.
Tensor d_loss(const Tensor& logits_real, const Tensor& logits_fake);

// non-saturating generator term: mean BCE(fake,1)
Tensor g_adv_loss(const Tensor& logits_fake);

// mean absolute difference over all elements
Tensor l1_loss(const Tensor& gen, const Tensor& target);

// sum of the two per-pair mean cross entropies
Tensor expr_loss(const Tensor& logits_real_pair, const Tensor& logits_fake_pair,
                 const std::vector<int>& labels);

struct CombinedObjectives {
    Tensor g;  // lambda1*g_adv + lambda2*l1 + lambda3*expr_fake
    Tensor d;  // lambda1*d
    Tensor e;  // lambda3*(expr_real + expr_fake)
};

struct LossParts {
    Tensor d;
    Tensor g_adv;
    Tensor l1;
    Tensor expr_real;
    Tensor expr_fake;
};

CombinedObjectives combined_loss(const LossParts& parts, const LossWeights& w);

void validate_weights(const LossWeights& w);

}  // namespace ifgan
