#pragma once

#include <map>
#include <variant>

#include "gnssfg/epoch_state.hpp"
#include "gnssfg/errors.hpp"
#include "gnssfg/keys.hpp"

namespace gnssfg {

/// A variable's value: a full epoch state or a scalar switch variable.
using Value = std::variant<EpochState, double>;

/// Assignment of values to variable keys; the estimate the solvers iterate on.
using Values = std::map<VariableKey, Value>;

inline int value_dim(const Value& v) {
    if (std::holds_alternative<double>(v)) return 1;
    return std::get<EpochState>(v).dim();
}

inline Eigen::VectorXd value_to_vector(const Value& v) {
    if (std::holds_alternative<double>(v)) {
        Eigen::VectorXd out(1);
        out(0) = std::get<double>(v);
        return out;
    }
    return std::get<EpochState>(v).to_vector();
}

inline void value_retract(Value& v, const Eigen::VectorXd& delta) {
    if (std::holds_alternative<double>(v)) {
        std::get<double>(v) += delta(0);
    } else {
        std::get<EpochState>(v).retract(delta);
    }
}

inline const EpochState& as_state(const Values& values, const VariableKey& key) {
    auto it = values.find(key);
    if (it == values.end()) throw IncompleteEstimate("no value for " + to_string(key));
    if (!std::holds_alternative<EpochState>(it->second))
        throw IncompleteEstimate(to_string(key) + " is not an epoch state");
    return std::get<EpochState>(it->second);
}

inline double as_scalar(const Values& values, const VariableKey& key) {
    auto it = values.find(key);
    if (it == values.end()) throw IncompleteEstimate("no value for " + to_string(key));
    if (!std::holds_alternative<double>(it->second))
        throw IncompleteEstimate(to_string(key) + " is not a scalar");
    return std::get<double>(it->second);
}

}  // namespace gnssfg
