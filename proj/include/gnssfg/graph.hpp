#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "gnssfg/factor.hpp"
#include "gnssfg/values.hpp"

namespace gnssfg {

/**
 * @brief Bipartite container of variables and factors.
 *
 * Edges exist only between a factor and the variables it references; that is
 * enforced by construction since factors are the only edge carriers. Factor
 * ids are unique and assigned on insertion unless the caller provides one.
 */
class FactorGraph {
public:
    const Values& variables() const { return variables_; }
    const std::vector<Factor>& factors() const { return factors_; }

    bool has_variable(const VariableKey& key) const { return variables_.count(key) > 0; }

    void add_variable(const VariableKey& key, Value initial) {
        if (key.kind == VariableKind::SwitchVar && key.tag.empty())
            throw ArityError("switch variables must carry a satellite tag");
        const bool finite = std::holds_alternative<double>(initial)
                                ? std::isfinite(std::get<double>(initial))
                                : std::get<EpochState>(initial).all_finite();
        if (!finite) throw Error("variable " + to_string(key) + " has non-finite value");
        auto [it, inserted] = variables_.emplace(key, std::move(initial));
        if (!inserted) throw DuplicateVariable("variable " + to_string(key) + " already present");
    }

    /// Validates arity, referenced variables, and the noise model, then
    /// appends the factor. Returns the assigned factor id.
    int add_factor(Factor factor) {
        validate_arity(factor);
        for (const auto& key : factor.variables)
            if (!has_variable(key))
                throw DanglingEdge("factor references missing variable " + to_string(key));
        if (factor.noise.size() > 0) sqrt_information(factor.noise);  // SPD check
        // Carrier-phase factors create the ambiguity entry they track.
        if (factor.kind == FactorKind::CarrierPhase) {
            const auto& obs = std::get<CarrierPhaseData>(factor.data).obs;
            auto& value = variables_.at(factor.variables[0]);
            auto& state = std::get<EpochState>(value);
            state.ambiguities.emplace(obs.sat_id, 0.0);
        }
        if (factor.id < 0) factor.id = next_id_++;
        else {
            if (index_of(factor.id) >= 0)
                throw ArityError("factor id " + std::to_string(factor.id) + " already in use");
            next_id_ = std::max(next_id_, factor.id + 1);
        }
        factors_.push_back(std::move(factor));
        return factors_.back().id;
    }

    const Factor& factor(int id) const {
        const int idx = index_of(id);
        if (idx < 0) throw UnknownVariable("no factor with id " + std::to_string(id));
        return factors_[static_cast<size_t>(idx)];
    }

    Factor& factor_mut(int id) { return const_cast<Factor&>(factor(id)); }

    void remove_factor(int id) {
        const int idx = index_of(id);
        if (idx < 0) throw UnknownVariable("no factor with id " + std::to_string(id));
        factors_.erase(factors_.begin() + idx);
    }

    void remove_variable(const VariableKey& key) {
        if (!variables_.erase(key))
            throw UnknownVariable("no variable " + to_string(key));
    }

    /// Keys of all variables, in epoch-major order.
    std::vector<VariableKey> ordered_keys() const {
        std::vector<VariableKey> keys;
        keys.reserve(variables_.size());
        for (const auto& [key, value] : variables_) keys.push_back(key);
        return keys;
    }

private:
    static void validate_arity(const Factor& factor) {
        const size_t n = factor.variables.size();
        auto expect = [&](bool ok, const char* what) {
            if (!ok)
                throw ArityError(std::string(to_string(factor.kind)) + " factor: " + what);
        };
        auto kind_of = [&](size_t i) { return factor.variables[i].kind; };
        switch (factor.kind) {
            case FactorKind::Prior:
                expect(n == 1, "expects exactly 1 variable");
                expect(kind_of(0) == VariableKind::EpochState, "expects an epoch state");
                break;
            case FactorKind::Between:
                expect(n == 2, "expects exactly 2 variables");
                expect(kind_of(0) == VariableKind::EpochState &&
                           kind_of(1) == VariableKind::EpochState,
                       "expects epoch states");
                break;
            case FactorKind::Pseudorange:
            case FactorKind::CarrierPhase:
                expect(n == 1 || n == 2, "expects 1 variable, or 2 when switch-augmented");
                expect(kind_of(0) == VariableKind::EpochState, "first variable must be a state");
                if (n == 2)
                    expect(kind_of(1) == VariableKind::SwitchVar,
                           "second variable must be a switch");
                break;
            case FactorKind::SwitchPrior:
                expect(n == 1 && kind_of(0) == VariableKind::SwitchVar,
                       "expects exactly 1 switch variable");
                break;
            case FactorKind::SwitchTransition:
                expect(n == 2 && kind_of(0) == VariableKind::SwitchVar &&
                           kind_of(1) == VariableKind::SwitchVar,
                       "expects exactly 2 switch variables");
                break;
            case FactorKind::MarginalPrior:
                break;  // any arity; may even be constant-only
        }
    }

    int index_of(int id) const {
        for (size_t i = 0; i < factors_.size(); ++i)
            if (factors_[i].id == id) return static_cast<int>(i);
        return -1;
    }

    Values variables_;
    std::vector<Factor> factors_;
    int next_id_ = 0;
};

/**
 * @brief Block-sparse whitened least-squares system at a linearization point.
 *
 * Rows are stacked in factor-id order, columns in epoch-major variable order.
 * Residuals and Jacobian blocks carry the noise whitening already, so the
 * unweighted cost is the plain squared norm of the stacked residual. Robust
 * kernels are not applied here.
 */
struct LinearizedSystem {
    struct Block {
        int factor_id;
        VariableKey key;
        Eigen::MatrixXd jacobian;
    };
    std::vector<Block> blocks;
    std::map<int, Eigen::VectorXd> residuals;
    std::map<VariableKey, std::pair<int, int>> column_index;  // offset, dim
    std::map<int, int> row_index;                             // factor id -> row offset
    int num_rows = 0;
    int num_columns = 0;

    Eigen::VectorXd stacked_residual() const {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(num_rows);
        for (const auto& [id, res] : residuals) r.segment(row_index.at(id), res.size()) = res;
        return r;
    }
};

inline LinearizedSystem linearize(const FactorGraph& graph, const Values& estimate) {
    LinearizedSystem system;
    int col = 0;
    for (const auto& [key, value] : graph.variables()) {
        auto it = estimate.find(key);
        if (it == estimate.end())
            throw IncompleteEstimate("estimate missing value for " + to_string(key));
        const int dim = value_dim(it->second);
        system.column_index.emplace(key, std::make_pair(col, dim));
        col += dim;
    }
    system.num_columns = col;

    std::vector<const Factor*> ordered;
    ordered.reserve(graph.factors().size());
    for (const auto& f : graph.factors()) ordered.push_back(&f);
    std::sort(ordered.begin(), ordered.end(),
              [](const Factor* a, const Factor* b) { return a->id < b->id; });

    int row = 0;
    for (const Factor* f : ordered) {
        FactorEval eval = f->evaluate(estimate, true);
        const int m = static_cast<int>(eval.residual.size());
        system.row_index.emplace(f->id, row);
        system.residuals.emplace(f->id, std::move(eval.residual));
        for (size_t i = 0; i < f->variables.size(); ++i)
            system.blocks.push_back({f->id, f->variables[i], std::move(eval.jacobians[i])});
        row += m;
    }
    system.num_rows = row;
    return system;
}

/// Robust total cost: each factor contributes its kernel-transformed whitened
/// squared residual (plus any marginal-prior constant).
inline double total_cost(const FactorGraph& graph, const Values& estimate) {
    double cost = 0.0;
    for (const auto& f : graph.factors()) {
        const FactorEval eval = f.evaluate(estimate, false);
        cost += kernel_cost(f.kernel, eval.residual) + f.constant_cost();
    }
    return cost;
}

/// Weighted least-squares objective the batch solvers drive: sum of
/// w_f * ||r_f||^2 with fixed per-factor weights (default 1), plus constants.
inline double weighted_cost(const FactorGraph& graph, const Values& estimate,
                            const std::map<int, double>& weights = {}) {
    double cost = 0.0;
    for (const auto& f : graph.factors()) {
        const FactorEval eval = f.evaluate(estimate, false);
        const auto it = weights.find(f.id);
        const double w = it == weights.end() ? 1.0 : it->second;
        cost += w * eval.residual.squaredNorm() + f.constant_cost();
    }
    return cost;
}

}  // namespace gnssfg
