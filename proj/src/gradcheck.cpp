#include "tft/gradcheck.hpp"

#include <cmath>

namespace tft {

GradCheckReport gradient_check(const std::function<Tensor()>& f,
                               const std::vector<std::pair<std::string, Tensor>>& params,
                               double perturbation) {
    if (perturbation <= 0.0) throw ConfigError("gradient_check: perturbation must be positive");

    // Analytic pass.
    std::vector<std::vector<double>> analytic;
    {
        for (const auto& [name, p] : params) {
            (void)name;
            const_cast<Tensor&>(p).zero_grad();
        }
        Tensor loss = f();
        if (!std::isfinite(loss.item()))
            throw NumericFault("gradient_check: non-finite loss at the unperturbed point");
        backward(loss);
        for (const auto& [name, p] : params) {
            (void)name;
            analytic.push_back(p.grad());
        }
    }

    GradCheckReport report;
    NoGradGuard no_grad;  // the probes only need values
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const auto& name = params[pi].first;
        auto& values = const_cast<Tensor&>(params[pi].second).data_mut();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + perturbation;
            const double f_plus = f().item();
            values[i] = saved - perturbation;
            const double f_minus = f().item();
            values[i] = saved;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                throw NumericFault("gradient_check: non-finite loss while perturbing " + name +
                                   "[" + std::to_string(i) + "]");
            const double numeric = (f_plus - f_minus) / (2.0 * perturbation);
            const double a = analytic[pi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace tft
