#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ifgan/rng.hpp"
#include "ifgan/tensor.hpp"

namespace ifgan {

enum class InitKind {
    normal_002,   // N(0, 0.02) — conv/linear weights
    ones_jitter,  // N(1, 0.02) — norm gamma
    zeros,        // biases, beta, running means
    ones,         // running variances
};

// Ordered name -> tensor registry. Iteration follows insertion order, which
// fixes both initialization draws and serialization layout.
class ParamStore {
public:
    explicit ParamStore(bool trainable = true) : trainable_(trainable) {}

    // Creates (drawing from rng) or returns the existing entry. Existing
    // entries must match the requested shape.
    Tensor get_or_create(const std::string& name, Shape shape, InitKind init, Rng& rng);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Tensor at(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    std::int64_t total_elements() const;

    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

    void zero_grads();

    // 64-bit checksum of all values, for change-detection in tests
    std::uint64_t value_checksum() const;

private:
    bool trainable_;
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

double init_draw(InitKind kind, Rng& rng);

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction over one ParamStore.
class Adam {
public:
    Adam(ParamStore& params, AdamConfig cfg);

    // One update from the gradients currently on the parameters. Missing
    // grad buffers count as zero. NaN gradients abort with the offending
    // parameter named.
    void step();

    std::int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }

    // moment buffers in parameter order, exposed for checkpointing
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    void set_step_count(std::int64_t n) { step_count_ = n; }

private:
    ParamStore& params_;
    AdamConfig cfg_;
    std::int64_t step_count_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace ifgan
