#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "gnssfg/epoch_state.hpp"
#include "gnssfg/errors.hpp"

namespace gnssfg {

constexpr double kPi = 3.14159265358979323846;

/// One satellite observation at one epoch. Positions are ENU meters.
struct SatelliteObservation {
    std::string sat_id;
    Eigen::Vector3d sat_position = Eigen::Vector3d::Zero();
    double pseudorange = 0.0;
    std::optional<double> carrier_phase_range;
    double elevation = kPi / 2;  // radians, in (0, pi/2]
};

/// Elevation mapping for the zenith troposphere delay, 1/sin(el),
/// clamped at 5 degrees to keep low-elevation slants bounded.
inline double tropo_mapping(double elevation) {
    constexpr double kMinElevation = 5.0 * kPi / 180.0;
    return 1.0 / std::sin(std::max(elevation, kMinElevation));
}

/**
 * @brief Predicted pseudorange: geometric range + clock bias + mapped troposphere.
 *
 * The observation equation deliberately carries only the states that are
 * estimated (receiver clock, zenith troposphere, per-satellite ambiguity for
 * carrier phase); ionosphere and satellite-side terms are not modeled and the
 * simulator generates measurements with the same equation.
 */
inline double pseudorange_predict(const EpochState& state, const SatelliteObservation& obs) {
    const Eigen::Vector3d los = obs.sat_position - state.position;
    const double range = los.norm();
    if (range < 1e-9) throw DegenerateGeometry("satellite coincides with receiver");
    return range + state.clock_bias + tropo_mapping(obs.elevation) * state.zenith_tropo;
}

/// Unit line-of-sight vector from receiver to satellite.
inline Eigen::Vector3d line_of_sight(const EpochState& state, const SatelliteObservation& obs) {
    const Eigen::Vector3d los = obs.sat_position - state.position;
    const double range = los.norm();
    if (range < 1e-9) throw DegenerateGeometry("satellite coincides with receiver");
    return los / range;
}

/**
 * @brief Between-epoch motion model.
 *
 * RandomWalk ties consecutive states together with the configured walk
 * densities; ConstantVelocity additionally shifts the expected position by
 * velocity*dt. Sigmas are continuous-time densities in m/sqrt(s); the factor
 * covariance is sigma^2 * dt. position_walk_sigma may be +inf, which leaves
 * position unconstrained between epochs (no position rows are generated).
 */
struct MotionModel {
    enum class Kind { RandomWalk, ConstantVelocity };

    Kind kind = Kind::RandomWalk;
    double dt = 1.0;
    double position_walk_sigma = 1.0;
    double clock_walk_sigma = 1.0;
    double tropo_walk_sigma = 0.01;
    double ambiguity_walk_sigma = 1e-4;  // constant-ambiguity coupling
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();

    bool constrains_position() const {
        return std::isfinite(position_walk_sigma);
    }

    Eigen::Vector3d position_displacement() const {
        return kind == Kind::ConstantVelocity ? Eigen::Vector3d(velocity * dt)
                                              : Eigen::Vector3d::Zero();
    }

    void validate() const {
        if (!(dt > 0)) throw BadNoiseModel("motion model dt must be positive");
        const bool ok = (position_walk_sigma > 0) && clock_walk_sigma > 0 &&
                        tropo_walk_sigma > 0 && ambiguity_walk_sigma > 0;
        if (!ok) throw BadNoiseModel("motion model walk sigmas must be positive");
    }

    /// Process covariance over [pos?, clock, tropo] accumulated over dt.
    Eigen::MatrixXd core_process_noise() const {
        const int n = constrains_position() ? 5 : 2;
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
        int i = 0;
        if (constrains_position()) {
            const double v = position_walk_sigma * position_walk_sigma * dt;
            q(0, 0) = q(1, 1) = q(2, 2) = v;
            i = 3;
        }
        q(i, i) = clock_walk_sigma * clock_walk_sigma * dt;
        q(i + 1, i + 1) = tropo_walk_sigma * tropo_walk_sigma * dt;
        return q;
    }
};

}  // namespace gnssfg
