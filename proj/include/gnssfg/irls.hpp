#pragma once

#include <map>

#include "gnssfg/solver.hpp"

namespace gnssfg {

/// IRLS weights for every factor at the current estimate: w = rho'(z)/z
/// evaluated at the whitened residual. Switch-linked factors scale
/// structurally and keep weight 1.
inline std::map<int, double> irls_weights(const FactorGraph& graph, const Values& estimate) {
    std::map<int, double> weights;
    for (const auto& f : graph.factors()) {
        if (is_switch_linked(f.kernel)) continue;
        const FactorEval eval = f.evaluate(estimate, false);
        weights[f.id] = kernel_weight_vec(f.kernel, eval.residual);
    }
    return weights;
}

/**
 * @brief Iteratively reweighted least squares over the factors' bound kernels.
 *
 * Alternates a weight refresh at the current residuals with one damped,
 * accept-only-on-decrease weighted least-squares step; acceptance and
 * convergence are judged on the robust total cost, so the reported trace is
 * the actual objective being minimized. With all-L2 kernels this reduces to
 * Levenberg-Marquardt step for step.
 */
inline SolveReport irls_solve(const FactorGraph& graph, const Values& init,
                              const SolverOptions& opts = {}) {
    opts.validate();
    detail::ensure_complete(graph, init);
    SolveReport report;
    report.estimate = init;
    double robust_cost = total_cost(graph, report.estimate);
    report.cost_trace.push_back(robust_cost);
    double lambda = opts.lm_initial_lambda;
    constexpr double kLambdaCap = 1e16;

    for (int iteration = 1; iteration <= opts.max_iterations; ++iteration) {
        const std::map<int, double> weights = irls_weights(graph, report.estimate);
        const LinearizedSystem system = linearize(graph, report.estimate);
        bool stop = false;
        bool accepted = false;
        while (!accepted) {
            DeltaMap delta;
            try {
                delta = solve_normal_equations(system, lambda, weights);
            } catch (const SingularSystem&) {
                lambda *= opts.lm_lambda_factor;
                if (lambda > kLambdaCap) { stop = true; break; }
                continue;
            }
            Values candidate = report.estimate;
            retract_all(candidate, delta);
            const double candidate_cost = total_cost(graph, candidate);
            if (candidate_cost < robust_cost) {
                accepted = true;
                report.estimate = std::move(candidate);
                report.iterations = iteration;
                report.cost_trace.push_back(candidate_cost);
                lambda = std::max(lambda / opts.lm_lambda_factor, 1e-15);
                if (delta_norm(delta) < opts.step_tol ||
                    detail::converged_by_cost(opts, robust_cost, candidate_cost)) {
                    report.converged = true;
                    stop = true;
                }
                robust_cost = candidate_cost;
            } else {
                lambda *= opts.lm_lambda_factor;
                if (lambda > kLambdaCap) {
                    report.converged = true;
                    stop = true;
                    break;
                }
            }
        }
        if (stop) break;
    }
    report.final_cost = robust_cost;
    return report;
}

}  // namespace gnssfg
