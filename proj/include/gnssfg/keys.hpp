#pragma once

#include <string>
#include <tuple>

namespace gnssfg {

enum class VariableKind { EpochState, SwitchVar };

/**
 * @brief Identifier for one variable vertex in the graph.
 *
 * Ordering is epoch-major: all variables of epoch k sort before epoch k+1,
 * and within an epoch the epoch state sorts before its switch variables.
 * Column ordering in the linearized system follows this ordering.
 */
struct VariableKey {
    VariableKind kind = VariableKind::EpochState;
    int epoch = 0;
    std::string tag;  // satellite identifier; empty for epoch states

    static VariableKey state(int epoch) { return {VariableKind::EpochState, epoch, {}}; }
    static VariableKey switch_var(int epoch, std::string sat) {
        return {VariableKind::SwitchVar, epoch, std::move(sat)};
    }

    friend bool operator==(const VariableKey& a, const VariableKey& b) {
        return a.epoch == b.epoch && a.kind == b.kind && a.tag == b.tag;
    }
    friend bool operator!=(const VariableKey& a, const VariableKey& b) { return !(a == b); }
    friend bool operator<(const VariableKey& a, const VariableKey& b) {
        return std::tie(a.epoch, a.kind, a.tag) < std::tie(b.epoch, b.kind, b.tag);
    }
};

inline std::string to_string(const VariableKey& key) {
    if (key.kind == VariableKind::EpochState) return "x" + std::to_string(key.epoch);
    return "s" + std::to_string(key.epoch) + "/" + key.tag;
}

}  // namespace gnssfg
