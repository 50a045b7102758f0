#pragma once

#include <algorithm>
#include <map>

#include "gnssfg/solver.hpp"

namespace gnssfg {

/**
 * @brief Annealing schedule for graduated non-convexity.
 *
 * mu starts in the near-quadratic regime and is divided by mu_update_factor
 * each outer iteration until it reaches mu_final (the target robust cost).
 * mu_initial <= 0 selects it automatically from the initial residual spread
 * so the first surrogate is effectively convex over the observed residuals.
 */
struct GncSchedule {
    double mu_initial = 0.0;  // <= 0: auto, 2 * max(residual^2) / c^2
    double mu_update_factor = 1.4;
    double mu_final = 1.0;
    SolverOptions inner;

    void validate() const {
        if (!(mu_update_factor > 1) || !(mu_final > 0))
            throw ConfigError("invalid gnc schedule");
        inner.validate();
    }
};

struct GncResult {
    SolveReport report;
    std::map<int, double> weights;  // per gnc factor; near 0 marks a rejected outlier
};

/**
 * @brief Graduated non-convexity over the factors bound to a Geman-McClure
 * kernel, via the weighted-least-squares form of the joint state/weight
 * problem.
 *
 * Outer loop anneals mu; each inner solve runs Levenberg-Marquardt with the
 * weights frozen at the current mu, then the weights are refreshed from the
 * new residuals. Factors without a GncKernel keep weight 1 throughout.
 */
inline GncResult gnc_solve(const FactorGraph& graph, const Values& init,
                           const GncSchedule& schedule = {}) {
    schedule.validate();
    detail::ensure_complete(graph, init);

    std::vector<std::pair<int, double>> gnc_factors;  // id, c
    for (const auto& f : graph.factors())
        if (const auto* k = std::get_if<GncKernel>(&f.kernel))
            gnc_factors.emplace_back(f.id, k->c);

    GncResult result;
    result.report.estimate = init;

    auto residual_sq = [&](const Values& estimate) {
        std::map<int, double> out;
        for (const auto& [id, c] : gnc_factors)
            out[id] = graph.factor(id).evaluate(estimate, false).residual.squaredNorm();
        return out;
    };

    std::map<int, double> r2 = residual_sq(result.report.estimate);
    double mu = schedule.mu_initial;
    if (mu <= 0.0) {
        mu = schedule.mu_final;
        for (const auto& [id, c] : gnc_factors)
            mu = std::max(mu, 2.0 * r2[id] / (c * c));
    }
    mu = std::max(mu, schedule.mu_final);

    int total_iterations = 0;
    bool last_converged = true;
    while (true) {
        std::map<int, double> weights;
        for (const auto& [id, c] : gnc_factors) weights[id] = gnc_weight(r2[id], mu, c);

        const SolveReport inner =
            levenberg_marquardt(graph, result.report.estimate, schedule.inner, weights);
        result.report.estimate = inner.estimate;
        total_iterations += inner.iterations;
        last_converged = inner.converged;
        r2 = residual_sq(result.report.estimate);
        result.report.cost_trace.push_back(total_cost(graph, result.report.estimate));

        if (mu <= schedule.mu_final) break;
        mu = std::max(mu / schedule.mu_update_factor, schedule.mu_final);
    }

    for (const auto& [id, c] : gnc_factors)
        result.weights[id] = gnc_weight(r2[id], schedule.mu_final, c);
    result.report.iterations = total_iterations;
    result.report.converged = last_converged;
    result.report.final_cost = total_cost(graph, result.report.estimate);
    return result;
}

}  // namespace gnssfg
