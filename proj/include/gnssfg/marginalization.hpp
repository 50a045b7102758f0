#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <vector>

#include "gnssfg/graph.hpp"

namespace gnssfg {

/**
 * @brief Dense prior on the window boundary produced by marginalization.
 *
 * sqrt_information^T * sqrt_information is the marginal information carried
 * by the consumed factors onto the boundary variables. constant_cost is the
 * residual energy eliminated with the dropped variables; keeping it makes
 * the total cost at the linearization point invariant under marginalization.
 */
struct MarginalPrior {
    std::vector<VariableKey> keys;     // boundary, epoch-major order
    Eigen::MatrixXd sqrt_information;  // upper trapezoidal
    Eigen::VectorXd rhs;
    Values linearization_point;
    double constant_cost = 0.0;

    bool empty() const { return keys.empty() && rhs.size() == 0 && constant_cost == 0.0; }
};

struct MarginalizationResult {
    FactorGraph graph;  // untouched factors + marginal prior factor
    MarginalPrior prior;
};

/**
 * @brief Eliminate variables from the graph in square-root information form.
 *
 * Every factor touching a dropped variable is consumed. The consumed factors
 * are stacked (whitened, with robust kernels frozen as IRLS weights at the
 * current residuals), the dropped columns are eliminated by QR, and the
 * remaining rows become a dense MarginalPrior on the boundary variables.
 * For linear factors this loses no information: the reduced graph has the
 * same posterior on the remaining variables as the original.
 */
inline MarginalizationResult marginalize(const FactorGraph& graph, const Values& estimate,
                                         const std::vector<VariableKey>& drop_keys) {
    for (const auto& key : drop_keys)
        if (!graph.has_variable(key))
            throw UnknownVariable("cannot drop unknown variable " + to_string(key));

    const std::set<VariableKey> dropped(drop_keys.begin(), drop_keys.end());

    std::vector<const Factor*> consumed;
    std::set<VariableKey> boundary_set;
    for (const auto& f : graph.factors()) {
        const bool touches = std::any_of(f.variables.begin(), f.variables.end(),
                                         [&](const VariableKey& k) { return dropped.count(k); });
        if (!touches) continue;
        consumed.push_back(&f);
        for (const auto& k : f.variables)
            if (!dropped.count(k)) boundary_set.insert(k);
    }
    std::sort(consumed.begin(), consumed.end(),
              [](const Factor* a, const Factor* b) { return a->id < b->id; });

    MarginalizationResult result;
    result.graph = graph;
    for (const auto& key : dropped) result.graph.remove_variable(key);
    if (consumed.empty()) return result;  // isolated variables: nothing to summarize

    // Column layout: dropped variables first (epoch order), boundary after.
    // Dropped variables no factor touches are simply removed; they carry no
    // information and would make the elimination block singular.
    std::set<VariableKey> dropped_active;
    for (const Factor* f : consumed)
        for (const auto& k : f->variables)
            if (dropped.count(k)) dropped_active.insert(k);
    std::vector<VariableKey> dropped_order(dropped_active.begin(), dropped_active.end());
    std::vector<VariableKey> boundary(boundary_set.begin(), boundary_set.end());
    std::map<VariableKey, int> col_offset;
    int nd = 0;
    for (const auto& key : dropped_order) {
        col_offset[key] = nd;
        nd += value_dim(estimate.at(key));
    }
    int ncols = nd;
    std::vector<int> boundary_dims;
    for (const auto& key : boundary) {
        col_offset[key] = ncols;
        const int dim = value_dim(estimate.at(key));
        boundary_dims.push_back(dim);
        ncols += dim;
    }
    const int nb = ncols - nd;

    int nrows = 0;
    std::vector<FactorEval> evals;
    std::vector<double> row_weights;
    evals.reserve(consumed.size());
    for (const Factor* f : consumed) {
        evals.push_back(f->evaluate(estimate, true));
        const double w =
            is_switch_linked(f->kernel) ? 1.0 : kernel_weight_vec(f->kernel, evals.back().residual);
        row_weights.push_back(std::sqrt(w));
        nrows += static_cast<int>(evals.back().residual.size());
    }

    Eigen::MatrixXd stacked_jac = Eigen::MatrixXd::Zero(nrows, ncols);
    Eigen::VectorXd stacked_res(nrows);
    int row = 0;
    for (size_t i = 0; i < consumed.size(); ++i) {
        const Factor* f = consumed[i];
        const int m = static_cast<int>(evals[i].residual.size());
        stacked_res.segment(row, m) = row_weights[i] * evals[i].residual;
        for (size_t v = 0; v < f->variables.size(); ++v)
            stacked_jac.block(row, col_offset.at(f->variables[v]), m,
                              evals[i].jacobians[v].cols()) =
                row_weights[i] * evals[i].jacobians[v];
        row += m;
    }

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked_jac);
    const Eigen::MatrixXd packed = qr.matrixQR();
    const Eigen::VectorXd qtr = qr.householderQ().transpose() * stacked_res;

    const double diag_scale = std::max(1.0, stacked_jac.cwiseAbs().maxCoeff());
    for (int i = 0; i < std::min(nd, nrows); ++i)
        if (std::abs(packed(i, i)) <= 1e-12 * diag_scale)
            throw SingularSystem("dropped variables are not fully constrained");
    if (nrows < nd) throw SingularSystem("dropped variables are not fully constrained");

    const int marginal_rows = std::clamp(std::min(nrows, ncols) - nd, 0, nb);
    Eigen::MatrixXd r_bb = Eigen::MatrixXd::Zero(marginal_rows, nb);
    for (int i = 0; i < marginal_rows; ++i)
        for (int j = nd + i; j < ncols; ++j) r_bb(i, j - nd) = packed(nd + i, j);
    const Eigen::VectorXd rhs = qtr.segment(nd, marginal_rows);

    MarginalPrior prior;
    prior.keys = boundary;
    prior.sqrt_information = r_bb;
    prior.rhs = rhs;
    prior.constant_cost = std::max(0.0, stacked_res.squaredNorm() - rhs.squaredNorm());
    Eigen::VectorXd lin_point(nb);
    int offset = 0;
    for (size_t i = 0; i < boundary.size(); ++i) {
        prior.linearization_point.emplace(boundary[i], estimate.at(boundary[i]));
        lin_point.segment(offset, boundary_dims[i]) = value_to_vector(estimate.at(boundary[i]));
        offset += boundary_dims[i];
    }

    for (const Factor* f : consumed) result.graph.remove_factor(f->id);

    Factor marginal;
    marginal.kind = FactorKind::MarginalPrior;
    marginal.variables = boundary;
    marginal.measurement = rhs;
    marginal.data = MarginalPriorData{r_bb, rhs, lin_point, boundary_dims, prior.constant_cost};
    result.graph.add_factor(std::move(marginal));
    result.prior = std::move(prior);
    return result;
}

}  // namespace gnssfg
