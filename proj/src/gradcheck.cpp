#include "ifgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ifgan/rng.hpp"

namespace ifgan {

namespace {

double rel_error(double a, double n) {
    return std::fabs(a - n) / std::max({1e-6, std::fabs(a), std::fabs(n)});
}

}  // namespace

std::string GradCheckReport::to_string() const {
    std::ostringstream os;
    os << (passed ? "pass" : "FAIL") << " max_rel_error=" << max_rel_error << " checked=" << checked
       << " (worst: input " << worst.input_index << " elem " << worst.element << " analytic "
       << worst.analytic << " numeric " << worst.numeric << ")";
    return os.str();
}

GradCheckReport gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                          const std::vector<Tensor>& inputs, const GradCheckOptions& opts) {
    PrecisionScope precision(Precision::f64);

    for (const auto& t : inputs)
        if (!t.all_finite()) throw std::invalid_argument("gradcheck: non-finite input");

    // leaves we differentiate with respect to
    std::vector<Tensor> leaves = inputs;
    for (auto& t : leaves) {
        t.set_requires_grad(true);
        t.zero_grad();
    }

    const double base = f(leaves).item();
    if (f(leaves).item() != base)
        throw std::runtime_error("gradcheck: f is not deterministic (repeated evaluation differs)");

    Tape tape;
    {
        TapeScope scope(tape);
        Tensor loss = f(leaves);
        tape.backward(loss);
    }

    GradCheckReport report;
    report.passed = true;
    Rng rng(opts.sample_seed);
    for (std::size_t idx = 0; idx < leaves.size(); ++idx) {
        Tensor& t = leaves[idx];
        const std::int64_t n = t.size();
        std::vector<std::int64_t> elems;
        if (n <= opts.sample_threshold) {
            for (std::int64_t i = 0; i < n; ++i) elems.push_back(i);
        } else {
            for (std::int64_t i = 0; i < opts.sample_count; ++i) elems.push_back(rng.uniform_int(n));
            std::sort(elems.begin(), elems.end());
            elems.erase(std::unique(elems.begin(), elems.end()), elems.end());
        }
        for (std::int64_t e : elems) {
            const double analytic = t.has_grad() ? t.grad()[static_cast<std::size_t>(e)] : 0.0;
            const double saved = t.values()[static_cast<std::size_t>(e)];
            t.values()[static_cast<std::size_t>(e)] = saved + opts.h;
            const double fp = f(leaves).item();
            t.values()[static_cast<std::size_t>(e)] = saved - opts.h;
            const double fm = f(leaves).item();
            t.values()[static_cast<std::size_t>(e)] = saved;
            const double numeric = (fp - fm) / (2.0 * opts.h);
            const double err = rel_error(analytic, numeric);
            ++report.checked;
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst = GradCheckEntry{idx, e, analytic, numeric, err};
            }
        }
    }
    report.passed = report.max_rel_error <= opts.tol;
    return report;
}

}  // namespace ifgan
