#include "ifgan/losses.hpp"

#include <stdexcept>

#include "ifgan/ops.hpp"

namespace ifgan {

namespace {

void check_finite(const char* who, const Tensor& t) {
    if (!t.all_finite()) throw std::runtime_error(std::string(who) + ": non-finite logits");
}

}  // namespace

Tensor d_loss(const Tensor& logits_real, const Tensor& logits_fake) {
    check_finite("d_loss", logits_real);
    check_finite("d_loss", logits_fake);
    return ops::add(ops::bce_with_logits_mean(logits_real, 1.0),
                    ops::bce_with_logits_mean(logits_fake, 0.0));
}

Tensor g_adv_loss(const Tensor& logits_fake) {
    check_finite("g_adv_loss", logits_fake);
    return ops::bce_with_logits_mean(logits_fake, 1.0);
}

Tensor l1_loss(const Tensor& gen, const Tensor& target) {
    if (gen.shape() != target.shape())
        throw std::invalid_argument("l1_loss: shape mismatch " + shape_str(gen.shape()) + " vs " +
                                    shape_str(target.shape()));
    return ops::mean(ops::abs(ops::sub(gen, target)));
}

Tensor expr_loss(const Tensor& logits_real_pair, const Tensor& logits_fake_pair,
                 const std::vector<int>& labels) {
    return ops::add(ops::softmax_cross_entropy_mean(logits_real_pair, labels),
                    ops::softmax_cross_entropy_mean(logits_fake_pair, labels));
}

void validate_weights(const LossWeights& w) {
    if (w.lambda1 < 0 || w.lambda2 < 0 || w.lambda3 < 0)
        throw std::invalid_argument("loss weights must be non-negative");
}

CombinedObjectives combined_loss(const LossParts& parts, const LossWeights& w) {
    validate_weights(w);
    CombinedObjectives obj;
    obj.g = ops::add(ops::add(ops::scale(parts.g_adv, w.lambda1), ops::scale(parts.l1, w.lambda2)),
                     ops::scale(parts.expr_fake, w.lambda3));
    obj.d = ops::scale(parts.d, w.lambda1);
    obj.e = ops::scale(ops::add(parts.expr_real, parts.expr_fake), w.lambda3);
    return obj;
}

}  // namespace ifgan
