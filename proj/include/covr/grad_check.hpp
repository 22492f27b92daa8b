#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "covr/autodiff.hpp"

namespace covr {

/// Builds a scalar on `tape` from leaves bound to the checked parameters.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckReport {
    std::vector<std::string> names;
    std::vector<double> max_rel_error;  // one per parameter tensor
    double tolerance = 0.0;

    double worst() const {
        return max_rel_error.empty() ? 0.0 : *std::max_element(max_rel_error.begin(), max_rel_error.end());
    }
    bool passed() const { return worst() < tolerance; }
};

/// Compares reverse-mode gradients of `fn` with central finite differences,
/// coordinate by coordinate. Relative error is |a - n| / max(1, |a|, |n|).
/// `params` are perturbed in place and restored before returning.
inline GradCheckReport grad_check(const ScalarFn& fn, std::span<Tensor> params, double eps, double tol,
                                  std::vector<std::string> names = {}) {
    if (!(eps > 0.0)) throw config_error("grad_check eps must be positive");
    if (names.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) names.push_back("param" + std::to_string(i));
    }
    if (names.size() != params.size()) throw input_error("grad_check: one name per parameter required");

    auto evaluate = [&](bool with_grad, std::vector<Tensor>* grads) {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(params.size());
        for (const Tensor& p : params) vars.push_back(tape.borrow(p, with_grad));
        Var out = fn(tape, vars);
        if (out.value().size() != 1) throw shape_error("grad_check function must return a scalar");
        const double y = out.value()[0];
        if (!std::isfinite(y)) throw numeric_error("grad_check: function value is not finite");
        if (with_grad) {
            tape.backward(out);
            for (const Var& v : vars) grads->push_back(tape.grad(v));
        }
        return y;
    };

    std::vector<Tensor> analytic;
    evaluate(true, &analytic);

    GradCheckReport report;
    report.names = std::move(names);
    report.tolerance = tol;
    for (std::size_t p = 0; p < params.size(); ++p) {
        double worst = 0.0;
        auto values = params[p].values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = evaluate(false, nullptr);
            values[i] = saved - eps;
            const double down = evaluate(false, nullptr);
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[p][i];
            const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, rel);
        }
        report.max_rel_error.push_back(worst);
    }
    return report;
}

}  // namespace covr
