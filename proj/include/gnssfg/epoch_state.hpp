#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace gnssfg {

/**
 * @brief Per-epoch estimated quantities.
 *
 * Position is in a local ENU frame (meters), clock bias is c*dt in meters,
 * zenith troposphere delay in meters, and carrier-phase ambiguities in
 * meters keyed by satellite id. The flattened layout is
 * [px py pz clock tropo amb...] with ambiguities in sorted satellite order,
 * so the tangent dimension is 5 + number of tracked ambiguities.
 */
struct EpochState {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    double clock_bias = 0.0;
    double zenith_tropo = 0.0;
    std::map<std::string, double> ambiguities;

    int dim() const { return 5 + static_cast<int>(ambiguities.size()); }

    std::vector<std::string> ambiguity_ids() const {
        std::vector<std::string> ids;
        ids.reserve(ambiguities.size());
        for (const auto& [sat, value] : ambiguities) ids.push_back(sat);
        return ids;
    }

    Eigen::VectorXd to_vector() const {
        Eigen::VectorXd v(dim());
        v.head<3>() = position;
        v(3) = clock_bias;
        v(4) = zenith_tropo;
        int i = 5;
        for (const auto& [sat, value] : ambiguities) v(i++) = value;
        return v;
    }

    /// Plain additive update; all state components are vector-valued.
    void retract(const Eigen::VectorXd& delta) {
        position += delta.head<3>();
        clock_bias += delta(3);
        zenith_tropo += delta(4);
        int i = 5;
        for (auto& [sat, value] : ambiguities) value += delta(i++);
    }

    /// Column offset of one component in the flattened layout, or -1.
    /// Components 0..4 are position/clock/tropo; ambiguities follow by sat id.
    int ambiguity_index(const std::string& sat) const {
        int i = 5;
        for (const auto& [id, value] : ambiguities) {
            if (id == sat) return i;
            ++i;
        }
        return -1;
    }

    bool all_finite() const {
        if (!position.allFinite() || !std::isfinite(clock_bias) || !std::isfinite(zenith_tropo))
            return false;
        for (const auto& [sat, value] : ambiguities)
            if (!std::isfinite(value)) return false;
        return true;
    }
};

}  // namespace gnssfg
