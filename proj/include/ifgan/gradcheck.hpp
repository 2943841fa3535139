#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ifgan/tensor.hpp"

namespace ifgan {

struct GradCheckOptions {
    double h = 1e-5;
    double tol = 1e-4;
    // inputs with more elements than this get a deterministic sample of
    // `sample_count` elements instead of an exhaustive sweep
    std::int64_t sample_threshold = 64;
    std::int64_t sample_count = 64;
    std::uint64_t sample_seed = 7;
};

struct GradCheckEntry {
    std::size_t input_index;
    std::int64_t element;
    double analytic;
    double numeric;
    double rel_error;
};

struct GradCheckReport {
    bool passed = false;
    double max_rel_error = 0.0;
    GradCheckEntry worst{};
    std::int64_t checked = 0;
    std::string to_string() const;
};

// Central-difference check of the tape gradients of a scalar-valued f.
// f must be deterministic (verified by evaluating twice) and is evaluated
// in 64-bit precision regardless of the active mode.
GradCheckReport gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                          const std::vector<Tensor>& inputs, const GradCheckOptions& opts = {});

}  // namespace ifgan
