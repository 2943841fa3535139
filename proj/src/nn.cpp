#include "ifgan/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace ifgan {

double init_draw(InitKind kind, Rng& rng) {
    switch (kind) {
        case InitKind::normal_002: return rng.normal(0.0, 0.02);
        case InitKind::ones_jitter: return rng.normal(1.0, 0.02);
        case InitKind::zeros: return 0.0;
        case InitKind::ones: return 1.0;
    }
    return 0.0;
}

Tensor ParamStore::get_or_create(const std::string& name, Shape shape, InitKind init, Rng& rng) {
    for (auto e : shape)
        if (e <= 0)
            throw std::invalid_argument("param '" + name + "': zero-extent shape " + shape_str(shape));
    auto it = index_.find(name);
    if (it != index_.end()) {
        Tensor existing = entries_[it->second].second;
        if (existing.shape() != shape)
            throw std::invalid_argument("param '" + name + "': shape " + shape_str(existing.shape()) +
                                        " does not match requested " + shape_str(shape));
        return existing;
    }
    Tensor t = Tensor::zeros(shape, trainable_);
    for (double& v : t.values()) v = init_draw(init, rng);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, t);
    return t;
}

Tensor ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("param '" + name + "' not found");
    return entries_[it->second].second;
}

std::int64_t ParamStore::total_elements() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : entries_) n += t.size();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : entries_) t.zero_grad();
}

std::uint64_t ParamStore::value_checksum() const {
    // FNV-1a over the raw value bytes
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& [name, t] : entries_) {
        for (double v : t.values()) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(v));
            __builtin_memcpy(&bits, &v, sizeof(bits));
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xff;
                h *= 1099511628211ull;
            }
        }
    }
    return h;
}

Adam::Adam(ParamStore& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
    for (const auto& [name, t] : params_.entries()) {
        m_.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
    }
}

void Adam::step() {
    // reject before mutating anything, so a bad step leaves no partial update
    for (const auto& [name, t] : params_.entries())
        for (double g : t.grad())
            if (std::isnan(g))
                throw std::runtime_error("adam: NaN gradient on parameter '" + name + "'");

    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    std::size_t idx = 0;
    for (const auto& [name, t] : params_.entries()) {
        Tensor param = t;
        auto pv = param.values();
        auto gv = param.grad();
        auto& m = m_[idx];
        auto& v = v_[idx];
        ++idx;
        if (gv.empty()) continue;  // no gradient reached this parameter
        for (std::size_t i = 0; i < pv.size(); ++i) {
            const double g = gv[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            pv[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        detail::maybe_quantize(pv);
    }
}

}  // namespace ifgan
