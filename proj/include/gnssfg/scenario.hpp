#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gnssfg/epoch_state.hpp"
#include "gnssfg/errors.hpp"
#include "gnssfg/gnss_models.hpp"

namespace gnssfg {

/// Deterministic random stream. Gaussians come from an explicit Box-Muller
/// transform so the draw sequence depends only on the seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    /// Gaussian truncated at +-6 sigma, by redraw.
    double truncated_normal(double sigma) {
        if (sigma <= 0.0) return 0.0;
        double z = normal();
        while (std::abs(z) > 6.0) z = normal();
        return sigma * z;
    }

private:
    std::mt19937_64 engine_;
};

struct OutlierModel {
    double probability = 0.0;
    double bias_min = 20.0;  // meters, > 0 (multipath delays the signal)
    double bias_max = 60.0;
    bool elevation_dependent = false;

    void validate() const {
        if (probability < 0.0 || probability > 1.0)
            throw ConfigError("outlier probability must lie in [0, 1]");
        if (!(bias_min > 0.0) || bias_min > bias_max)
            throw ConfigError("outlier bias range requires 0 < min <= max");
    }

    /// Injection probability at a given elevation: a linear ramp doubles the
    /// rate from 30 degrees down to the horizon when elevation_dependent.
    double probability_at(double elevation) const {
        if (!elevation_dependent) return probability;
        const double deg = elevation * 180.0 / kPi;
        const double ramp = deg >= 30.0 ? 1.0 : 1.0 + (30.0 - deg) / 30.0;
        return std::min(1.0, probability * ramp);
    }
};

struct TrajectoryConfig {
    enum class Kind { Static, ConstantVelocity, Waypoints };
    Kind kind = Kind::Static;
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    std::vector<Eigen::Vector3d> waypoints;

    Eigen::Vector3d position_at(int epoch, double dt, int n_epochs) const {
        switch (kind) {
            case Kind::Static: return Eigen::Vector3d::Zero();
            case Kind::ConstantVelocity: return velocity * (epoch * dt);
            case Kind::Waypoints: {
                if (waypoints.empty()) return Eigen::Vector3d::Zero();
                if (waypoints.size() == 1 || n_epochs <= 1) return waypoints.front();
                const double s = static_cast<double>(epoch) / (n_epochs - 1) *
                                 (static_cast<double>(waypoints.size()) - 1.0);
                const int seg = std::min(static_cast<int>(s),
                                         static_cast<int>(waypoints.size()) - 2);
                const double frac = s - seg;
                return (1.0 - frac) * waypoints[seg] + frac * waypoints[seg + 1];
            }
        }
        return Eigen::Vector3d::Zero();
    }
};

struct ScenarioConfig {
    int n_epochs = 30;
    double dt = 1.0;
    int n_satellites = 8;
    TrajectoryConfig trajectory;
    double pseudorange_sigma = 2.0;
    double phase_sigma = 0.02;
    bool with_carrier_phase = false;
    double clock_walk_sigma = 0.5;   // m/sqrt(s)
    double tropo_walk_sigma = 0.005; // m/sqrt(s)
    OutlierModel outlier;
    std::uint64_t rng_seed = 1;

    // Plumbing knobs
    double clock_initial = 30.0;        // m
    double tropo_initial = 2.4;         // m
    double ambiguity_spread = 30.0;     // m, per-satellite pass constant
    double min_elevation_deg = 15.0;
    double max_elevation_deg = 80.0;
    double init_position_sigma = 30.0;  // initialization perturbation used by graph builders
    double init_clock_sigma = 30.0;
    double init_tropo_sigma = 0.5;
    double init_ambiguity_sigma = 5.0;

    void validate() const {
        if (n_epochs < 1) throw ConfigError("n_epochs must be >= 1");
        if (!(dt > 0)) throw ConfigError("dt must be positive");
        if (n_satellites < 4)
            throw ConfigError("need at least 4 satellites for position+clock observability");
        if (pseudorange_sigma < 0 || phase_sigma < 0 || clock_walk_sigma < 0 ||
            tropo_walk_sigma < 0)
            throw ConfigError("sigmas must be nonnegative");
        if (!(min_elevation_deg > 0) || max_elevation_deg > 90.0 ||
            min_elevation_deg > max_elevation_deg)
            throw ConfigError("elevation bounds must satisfy 0 < min <= max <= 90");
        outlier.validate();
    }
};

/// Synthetic ground truth plus generated observations with per-measurement
/// outlier truth labels.
struct Scenario {
    std::vector<EpochState> truth;
    std::vector<std::vector<SatelliteObservation>> observations;  // per epoch
    std::vector<std::vector<bool>> outlier_labels;                // parallel to observations
    ScenarioConfig config;

    int n_epochs() const { return static_cast<int>(truth.size()); }
};

namespace detail {

inline double gdop(const std::vector<Eigen::Vector3d>& directions) {
    Eigen::MatrixXd geometry(static_cast<int>(directions.size()), 4);
    for (size_t i = 0; i < directions.size(); ++i) {
        geometry.block<1, 3>(static_cast<int>(i), 0) = -directions[i].transpose();
        geometry(static_cast<int>(i), 3) = 1.0;
    }
    const Eigen::Matrix4d normal = geometry.transpose() * geometry;
    Eigen::FullPivLU<Eigen::Matrix4d> lu(normal);
    if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
    return std::sqrt(lu.inverse().trace());
}

}  // namespace detail

/**
 * @brief Generate a synthetic scenario: constellation, trajectory, clock and
 * troposphere random walks, measurement noise, and multipath outliers.
 *
 * Satellites sit on a 20,200 km shell, static over the run, spread in
 * azimuth/elevation until the constellation GDOP is below 10 (at most 100
 * placement attempts). Outliers add a positive uniform bias to the
 * pseudorange only. Fully deterministic for a fixed seed.
 */
inline Scenario generate(const ScenarioConfig& config) {
    config.validate();
    Rng rng(config.rng_seed);
    constexpr double kShellRadius = 20.2e6;

    // Constellation placement
    std::vector<Eigen::Vector3d> directions(static_cast<size_t>(config.n_satellites));
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        for (int i = 0; i < config.n_satellites; ++i) {
            const double slot = 2.0 * kPi / config.n_satellites;
            const double az = slot * i + rng.uniform(-0.35, 0.35) * slot;
            const double el = rng.uniform(config.min_elevation_deg * kPi / 180.0,
                                          config.max_elevation_deg * kPi / 180.0);
            directions[static_cast<size_t>(i)] = Eigen::Vector3d(
                std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el));
        }
        placed = detail::gdop(directions) < 10.0;
    }
    if (!placed) throw GeometryError("no constellation with GDOP < 10 after 100 attempts");

    std::vector<std::string> sat_ids;
    std::vector<Eigen::Vector3d> sat_positions;
    for (int i = 0; i < config.n_satellites; ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "G%02d", i + 1);
        sat_ids.emplace_back(id);
        sat_positions.push_back(directions[static_cast<size_t>(i)] * kShellRadius);
    }

    // Per-satellite carrier ambiguities, constant over the pass.
    std::map<std::string, double> ambiguities;
    if (config.with_carrier_phase)
        for (const auto& id : sat_ids)
            ambiguities[id] = rng.uniform(-config.ambiguity_spread, config.ambiguity_spread);

    Scenario scenario;
    scenario.config = config;
    double clock = config.clock_initial;
    double tropo = config.tropo_initial;
    for (int epoch = 0; epoch < config.n_epochs; ++epoch) {
        if (epoch > 0) {
            clock += config.clock_walk_sigma * std::sqrt(config.dt) * rng.normal();
            tropo += config.tropo_walk_sigma * std::sqrt(config.dt) * rng.normal();
        }
        EpochState truth;
        truth.position = config.trajectory.position_at(epoch, config.dt, config.n_epochs);
        truth.clock_bias = clock;
        truth.zenith_tropo = tropo;
        truth.ambiguities = ambiguities;
        scenario.truth.push_back(truth);

        std::vector<SatelliteObservation> epoch_obs;
        std::vector<bool> epoch_labels;
        for (int i = 0; i < config.n_satellites; ++i) {
            const Eigen::Vector3d los = sat_positions[static_cast<size_t>(i)] - truth.position;
            const double range = los.norm();
            const double elevation = std::asin(los.z() / range);
            if (elevation <= 0) continue;  // receiver moved a satellite below the horizon

            SatelliteObservation obs;
            obs.sat_id = sat_ids[static_cast<size_t>(i)];
            obs.sat_position = sat_positions[static_cast<size_t>(i)];
            obs.elevation = elevation;
            const double model = range + clock + tropo_mapping(elevation) * tropo;
            obs.pseudorange = model + rng.truncated_normal(config.pseudorange_sigma);
            bool is_outlier = false;
            if (rng.uniform() < config.outlier.probability_at(elevation)) {
                is_outlier = true;
                obs.pseudorange += rng.uniform(config.outlier.bias_min, config.outlier.bias_max);
            }
            if (config.with_carrier_phase)
                obs.carrier_phase_range = model + ambiguities.at(obs.sat_id) +
                                          rng.truncated_normal(config.phase_sigma);
            epoch_obs.push_back(std::move(obs));
            epoch_labels.push_back(is_outlier);
        }
        scenario.observations.push_back(std::move(epoch_obs));
        scenario.outlier_labels.push_back(std::move(epoch_labels));
    }
    return scenario;
}

}  // namespace gnssfg
