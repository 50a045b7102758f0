#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gnssfg/graph.hpp"

namespace gnssfg {

struct SolverOptions {
    int max_iterations = 50;
    double abs_cost_tol = 1e-12;
    double rel_cost_tol = 1e-9;
    double step_tol = 1e-10;
    double lm_initial_lambda = 1e-4;
    double lm_lambda_factor = 10.0;

    void validate() const {
        if (max_iterations < 1 || !(abs_cost_tol > 0) || !(rel_cost_tol > 0) ||
            !(step_tol > 0) || !(lm_initial_lambda > 0) || !(lm_lambda_factor > 1))
            throw ConfigError("invalid solver options");
    }
};

struct SolveReport {
    Values estimate;
    int iterations = 0;
    double final_cost = 0.0;
    bool converged = false;
    std::vector<double> cost_trace;  // accepted costs only
};

using DeltaMap = std::map<VariableKey, Eigen::VectorXd>;

inline void retract_all(Values& values, const DeltaMap& delta) {
    for (const auto& [key, d] : delta) value_retract(values.at(key), d);
}

inline double delta_norm(const DeltaMap& delta) {
    double sq = 0.0;
    for (const auto& [key, d] : delta) sq += d.squaredNorm();
    return std::sqrt(sq);
}

/**
 * @brief Solve the damped weighted normal equations of a linearized system.
 *
 * Minimizes ||sqrt(W)(J*delta + r)||^2 + damping*||delta||^2 over delta,
 * with W a per-factor scalar weight applied to that factor's rows. The
 * normal matrix is assembled sparse and factorized with a sparse Cholesky.
 *
 * Throws SingularSystem when the (undamped) normal matrix is not positive
 * definite; callers may retry with damping.
 */
inline DeltaMap solve_normal_equations(const LinearizedSystem& system, double damping = 0.0,
                                       const std::map<int, double>& weights = {}) {
    if (system.num_rows == 0 || system.num_columns == 0)
        throw SingularSystem("empty linearized system");

    auto weight_of = [&](int factor_id) {
        const auto it = weights.find(factor_id);
        return it == weights.end() ? 1.0 : it->second;
    };

    std::vector<Eigen::Triplet<double>> triplets;
    for (const auto& block : system.blocks) {
        const double sw = std::sqrt(weight_of(block.factor_id));
        const int row0 = system.row_index.at(block.factor_id);
        const auto [col0, dim] = system.column_index.at(block.key);
        for (int r = 0; r < block.jacobian.rows(); ++r)
            for (int c = 0; c < dim; ++c) {
                const double v = block.jacobian(r, c);
                if (v != 0.0) triplets.emplace_back(row0 + r, col0 + c, sw * v);
            }
    }
    Eigen::SparseMatrix<double> jac(system.num_rows, system.num_columns);
    jac.setFromTriplets(triplets.begin(), triplets.end());

    Eigen::VectorXd residual = Eigen::VectorXd::Zero(system.num_rows);
    for (const auto& [id, r] : system.residuals)
        residual.segment(system.row_index.at(id), r.size()) = std::sqrt(weight_of(id)) * r;

    Eigen::SparseMatrix<double> normal = (jac.transpose() * jac).pruned();
    if (damping > 0.0) {
        Eigen::SparseMatrix<double> identity(system.num_columns, system.num_columns);
        identity.setIdentity();
        normal += damping * identity;
    }
    const Eigen::VectorXd rhs = -jac.transpose() * residual;

    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol(normal);
    if (chol.info() != Eigen::Success)
        throw SingularSystem(damping > 0.0 ? "damped normal matrix not positive definite"
                                           : "normal matrix rank deficient; retry with damping");
    const Eigen::VectorXd delta = chol.solve(rhs);
    if (!delta.allFinite()) throw SingularSystem("normal-equation solution not finite");

    DeltaMap out;
    for (const auto& [key, range] : system.column_index)
        out.emplace(key, delta.segment(range.first, range.second));
    return out;
}

namespace detail {

inline void ensure_complete(const FactorGraph& graph, const Values& init) {
    for (const auto& [key, value] : graph.variables()) {
        auto it = init.find(key);
        if (it == init.end())
            throw IncompleteEstimate("initial estimate missing " + to_string(key));
        if (std::holds_alternative<EpochState>(value)) {
            const auto& graph_state = std::get<EpochState>(value);
            const auto& init_state = as_state(init, key);
            for (const auto& [sat, amb] : graph_state.ambiguities)
                if (!init_state.ambiguities.count(sat))
                    throw IncompleteEstimate("initial estimate for " + to_string(key) +
                                             " missing ambiguity " + sat);
        }
    }
}

inline bool converged_by_cost(const SolverOptions& opts, double previous, double current) {
    const double drop = std::abs(previous - current);
    if (drop < opts.abs_cost_tol) return true;
    return previous > 0.0 && drop / previous < opts.rel_cost_tol;
}

}  // namespace detail

/**
 * @brief Gauss-Newton iteration: relinearize, solve undamped, update.
 *
 * Fixed per-factor weights turn this into the inner engine of IRLS; the
 * objective is then the weighted squared-residual cost with those weights
 * held constant. On a purely linear graph the first step lands on the
 * weighted least-squares optimum.
 */
inline SolveReport gauss_newton(const FactorGraph& graph, const Values& init,
                                const SolverOptions& opts = {},
                                const std::map<int, double>& weights = {}) {
    opts.validate();
    detail::ensure_complete(graph, init);
    SolveReport report;
    report.estimate = init;
    double cost = weighted_cost(graph, report.estimate, weights);
    report.cost_trace.push_back(cost);

    for (int iteration = 1; iteration <= opts.max_iterations; ++iteration) {
        const LinearizedSystem system = linearize(graph, report.estimate);
        DeltaMap delta;
        try {
            delta = solve_normal_equations(system, 0.0, weights);
        } catch (const SingularSystem& err) {
            throw SingularSystem(std::string(err.what()) + " (gauss-newton iteration " +
                                 std::to_string(iteration) + ")");
        }
        retract_all(report.estimate, delta);
        const double new_cost = weighted_cost(graph, report.estimate, weights);
        report.cost_trace.push_back(new_cost);
        report.iterations = iteration;
        if (delta_norm(delta) < opts.step_tol ||
            detail::converged_by_cost(opts, cost, new_cost)) {
            report.converged = true;
            cost = new_cost;
            break;
        }
        cost = new_cost;
    }
    report.final_cost = cost;
    return report;
}

/**
 * @brief Levenberg-Marquardt: damped steps, accepted only on cost decrease.
 *
 * Lambda shrinks by lm_lambda_factor on acceptance and grows on rejection,
 * so the accepted cost trace is strictly decreasing. Hitting max_iterations
 * without meeting a tolerance reports converged = false rather than failing.
 */
inline SolveReport levenberg_marquardt(const FactorGraph& graph, const Values& init,
                                       const SolverOptions& opts = {},
                                       const std::map<int, double>& weights = {}) {
    opts.validate();
    detail::ensure_complete(graph, init);
    SolveReport report;
    report.estimate = init;
    double cost = weighted_cost(graph, report.estimate, weights);
    report.cost_trace.push_back(cost);
    double lambda = opts.lm_initial_lambda;
    constexpr double kLambdaCap = 1e16;

    for (int iteration = 1; iteration <= opts.max_iterations; ++iteration) {
        const LinearizedSystem system = linearize(graph, report.estimate);
        bool accepted = false;
        bool stop = false;
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
            const double candidate_cost = weighted_cost(graph, candidate, weights);
            if (candidate_cost < cost) {
                accepted = true;
                report.estimate = std::move(candidate);
                report.iterations = iteration;
                report.cost_trace.push_back(candidate_cost);
                lambda = std::max(lambda / opts.lm_lambda_factor, 1e-15);
                if (delta_norm(delta) < opts.step_tol ||
                    detail::converged_by_cost(opts, cost, candidate_cost)) {
                    report.converged = true;
                    stop = true;
                }
                cost = candidate_cost;
            } else {
                lambda *= opts.lm_lambda_factor;
                if (lambda > kLambdaCap) {
                    // No acceptable step exists at any damping: stationary.
                    report.converged = true;
                    stop = true;
                    break;
                }
            }
        }
        if (stop) break;
    }
    report.final_cost = cost;
    return report;
}

}  // namespace gnssfg
