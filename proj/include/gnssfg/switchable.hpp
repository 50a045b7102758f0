#pragma once

#include <map>
#include <optional>
#include <vector>

#include "gnssfg/graph.hpp"

namespace gnssfg {

/**
 * @brief Rewire measurement factors through switch variables.
 *
 * Each target factor gains a scalar switch variable s (initialized at 1) that
 * scales its whitened residual by clamp(s, 0, 1); a prior on s anchors the
 * switch so the optimizer cannot silence every measurement for free. When
 * transition_sigma is given, switches of the same satellite at consecutive
 * epochs are tied together.
 *
 * Returns the augmented graph; the input graph is taken by value.
 */
inline FactorGraph augment_with_switches(FactorGraph graph, const std::vector<int>& target_ids,
                                         double switch_prior_mean = 1.0,
                                         double switch_prior_sigma = 0.1,
                                         std::optional<double> transition_sigma = std::nullopt) {
    std::map<std::string, std::vector<VariableKey>> by_tag;
    for (int id : target_ids) {
        Factor& f = graph.factor_mut(id);
        if (!f.is_measurement())
            throw KernelMisuse("switch constraints apply to measurement factors only (factor " +
                               std::to_string(id) + " is " + to_string(f.kind) + ")");
        if (f.variables.size() != 1)
            throw KernelMisuse("factor " + std::to_string(id) + " is already switch-augmented");

        const auto& obs = f.kind == FactorKind::CarrierPhase
                              ? std::get<CarrierPhaseData>(f.data).obs
                              : std::get<PseudorangeData>(f.data).obs;
        std::string tag = obs.sat_id;
        if (f.kind == FactorKind::CarrierPhase) tag += ":cp";
        const VariableKey switch_key = VariableKey::switch_var(f.variables[0].epoch, tag);
        if (!graph.has_variable(switch_key)) graph.add_variable(switch_key, 1.0);
        f.variables.push_back(switch_key);
        f.kernel = SwitchLinkedKernel{switch_key};
        graph.add_factor(switch_prior_factor(switch_key, switch_prior_mean, switch_prior_sigma));
        by_tag[tag].push_back(switch_key);
    }

    if (transition_sigma) {
        for (auto& [tag, keys] : by_tag) {
            std::sort(keys.begin(), keys.end());
            for (size_t i = 1; i < keys.size(); ++i)
                if (keys[i].epoch == keys[i - 1].epoch + 1)
                    graph.add_factor(
                        switch_transition_factor(keys[i - 1], keys[i], *transition_sigma));
        }
    }
    return graph;
}

/// Final switch values, keyed by the measurement factor they gate.
inline std::map<int, double> switch_values(const FactorGraph& graph, const Values& estimate) {
    std::map<int, double> out;
    for (const auto& f : graph.factors())
        if (f.is_measurement() && f.variables.size() == 2)
            out[f.id] = as_scalar(estimate, f.variables[1]);
    return out;
}

}  // namespace gnssfg
