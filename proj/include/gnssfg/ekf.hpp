#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

#include "gnssfg/gnss_models.hpp"
#include "gnssfg/errors.hpp"

namespace gnssfg {

/// Gaussian filter belief over one epoch state. The covariance follows the
/// flattened state layout [pos clock tropo amb...].
struct FilterState {
    EpochState mean;
    Eigen::MatrixXd covariance;

    static FilterState from_sigmas(const EpochState& mean, const Eigen::VectorXd& sigmas) {
        FilterState s;
        s.mean = mean;
        s.covariance = sigmas.array().square().matrix().asDiagonal();
        return s;
    }
};

struct MeasurementNoise {
    double pseudorange_sigma = 2.0;
    double phase_sigma = 0.02;
    bool use_phase = false;
    double new_ambiguity_sigma = 100.0;  // prior spread for a newly tracked ambiguity
};

/// Track a new carrier ambiguity: grows mean and covariance, keeping the
/// sorted ambiguity layout consistent.
inline void ekf_add_ambiguity(FilterState& state, const std::string& sat, double initial_value,
                              double initial_sigma) {
    if (state.mean.ambiguities.count(sat)) return;
    const auto old_ids = state.mean.ambiguity_ids();
    state.mean.ambiguities.emplace(sat, initial_value);
    const auto new_ids = state.mean.ambiguity_ids();

    const int n_old = 5 + static_cast<int>(old_ids.size());
    const int n_new = n_old + 1;
    std::vector<int> new_index(n_old);
    for (int i = 0; i < 5; ++i) new_index[i] = i;
    for (size_t i = 0; i < old_ids.size(); ++i) {
        const auto pos = std::find(new_ids.begin(), new_ids.end(), old_ids[i]) - new_ids.begin();
        new_index[5 + i] = 5 + static_cast<int>(pos);
    }
    const int inserted =
        5 + static_cast<int>(std::find(new_ids.begin(), new_ids.end(), sat) - new_ids.begin());

    Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(n_new, n_new);
    for (int i = 0; i < n_old; ++i)
        for (int j = 0; j < n_old; ++j) grown(new_index[i], new_index[j]) = state.covariance(i, j);
    grown(inserted, inserted) = initial_sigma * initial_sigma;
    state.covariance = std::move(grown);
}

/**
 * @brief Time update. Random-walk propagation: the mean moves only by the
 * motion model's deterministic displacement; the covariance grows by the
 * dt-scaled process noise. An infinite position walk sigma decouples the
 * position across epochs via a large variance injection.
 */
inline FilterState ekf_predict(const FilterState& state, const MotionModel& model) {
    FilterState out = state;
    out.mean.position += model.position_displacement();
    const int n = out.mean.dim();
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    const double pos_var = std::isfinite(model.position_walk_sigma)
                               ? model.position_walk_sigma * model.position_walk_sigma * model.dt
                               : 1e12;
    q.head<3>().setConstant(pos_var);
    q(3) = model.clock_walk_sigma * model.clock_walk_sigma * model.dt;
    q(4) = model.tropo_walk_sigma * model.tropo_walk_sigma * model.dt;
    for (int i = 5; i < n; ++i)
        q(i) = model.ambiguity_walk_sigma * model.ambiguity_walk_sigma * model.dt;
    out.covariance += q.asDiagonal().toDenseMatrix();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
}

namespace detail {

struct StackedObservation {
    Eigen::VectorXd z;
    Eigen::VectorXd predicted;
    Eigen::MatrixXd jacobian;
    Eigen::MatrixXd noise_cov;
};

inline StackedObservation stack_observations(const EpochState& x,
                                             std::span<const SatelliteObservation> observations,
                                             const MeasurementNoise& noise) {
    int m = 0;
    for (const auto& obs : observations) {
        ++m;
        if (noise.use_phase && obs.carrier_phase_range) ++m;
    }
    const int n = x.dim();
    StackedObservation s;
    s.z.resize(m);
    s.predicted.resize(m);
    s.jacobian = Eigen::MatrixXd::Zero(m, n);
    s.noise_cov = Eigen::MatrixXd::Zero(m, m);

    int row = 0;
    for (const auto& obs : observations) {
        const double mapping = tropo_mapping(obs.elevation);
        const Eigen::Vector3d u = line_of_sight(x, obs);
        const double range_pred = pseudorange_predict(x, obs);
        s.z(row) = obs.pseudorange;
        s.predicted(row) = range_pred;
        s.jacobian.block<1, 3>(row, 0) = -u.transpose();
        s.jacobian(row, 3) = 1.0;
        s.jacobian(row, 4) = mapping;
        s.noise_cov(row, row) = noise.pseudorange_sigma * noise.pseudorange_sigma;
        ++row;
        if (noise.use_phase && obs.carrier_phase_range) {
            const int amb_col = x.ambiguity_index(obs.sat_id);
            s.z(row) = *obs.carrier_phase_range;
            s.predicted(row) = range_pred + x.ambiguities.at(obs.sat_id);
            s.jacobian.block<1, 3>(row, 0) = -u.transpose();
            s.jacobian(row, 3) = 1.0;
            s.jacobian(row, 4) = mapping;
            s.jacobian(row, amb_col) = 1.0;
            s.noise_cov(row, row) = noise.phase_sigma * noise.phase_sigma;
            ++row;
        }
    }
    return s;
}

/// One iterated update pass given a callable that stacks z/h/H at a state.
template <typename StackFn>
FilterState iterated_update(const FilterState& prior, StackFn&& stack, int iterations,
                            double step_tol) {
    if (iterations < 1) throw SingularInnovation("update needs at least one iteration");
    const Eigen::VectorXd prior_vec = prior.mean.to_vector();
    EpochState x = prior.mean;
    Eigen::MatrixXd kalman_gain, jacobian;

    for (int it = 0; it < iterations; ++it) {
        StackedObservation s = stack(x);
        const Eigen::MatrixXd innovation_cov =
            s.jacobian * prior.covariance * s.jacobian.transpose() + s.noise_cov;
        Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
        if (llt.info() != Eigen::Success)
            throw SingularInnovation("innovation covariance not positive definite");
        kalman_gain = prior.covariance * s.jacobian.transpose() *
                      llt.solve(Eigen::MatrixXd::Identity(innovation_cov.rows(),
                                                          innovation_cov.rows()));
        jacobian = s.jacobian;

        const Eigen::VectorXd x_vec = x.to_vector();
        const Eigen::VectorXd innovation = s.z - s.predicted - s.jacobian * (prior_vec - x_vec);
        const Eigen::VectorXd next = prior_vec + kalman_gain * innovation;
        const double step = (next - x_vec).norm();
        x.retract(next - x_vec);
        if (step < step_tol) break;
    }

    FilterState out;
    out.mean = x;
    const int n = prior.mean.dim();
    const Eigen::MatrixXd identity_khi =
        Eigen::MatrixXd::Identity(n, n) - kalman_gain * jacobian;
    // Joseph form keeps the covariance symmetric positive definite.
    StackedObservation s_final = stack(x);
    out.covariance = identity_khi * prior.covariance * identity_khi.transpose() +
                     kalman_gain * s_final.noise_cov * kalman_gain.transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
}

}  // namespace detail

/**
 * @brief Measurement update over a set of satellite observations.
 *
 * iterations = 1 is the standard EKF (one linearization at the prior mean);
 * iterations = n relinearizes at each iterate, which converges to the
 * Gauss-Newton solution of the equivalent single-epoch graph. Phase
 * observations for untracked satellites grow the ambiguity state first.
 */
inline FilterState ekf_update(const FilterState& state,
                              std::span<const SatelliteObservation> observations,
                              const MeasurementNoise& noise, int iterations = 1,
                              double step_tol = 1e-12) {
    if (observations.empty()) throw SingularInnovation("update needs at least one observation");
    FilterState prior = state;
    if (noise.use_phase)
        for (const auto& obs : observations)
            if (obs.carrier_phase_range && !prior.mean.ambiguities.count(obs.sat_id))
                ekf_add_ambiguity(prior, obs.sat_id,
                                  *obs.carrier_phase_range - pseudorange_predict(prior.mean, obs),
                                  noise.new_ambiguity_sigma);
    return detail::iterated_update(
        prior, [&](const EpochState& x) { return detail::stack_observations(x, observations, noise); },
        iterations, step_tol);
}

/// Update on a direct (linear) observation of selected state components,
/// expressed as an EpochState and its covariance, like a position fix.
inline FilterState ekf_update_direct(const FilterState& state, const EpochState& measured,
                                     const Eigen::MatrixXd& covariance, int iterations = 1) {
    const int m = measured.dim();
    if (covariance.rows() != m || covariance.cols() != m)
        throw SingularInnovation("direct-update covariance dimension mismatch");
    const auto sats = measured.ambiguity_ids();
    return detail::iterated_update(
        state,
        [&](const EpochState& x) {
            detail::StackedObservation s;
            s.z = measured.to_vector();
            s.predicted.resize(m);
            s.jacobian = Eigen::MatrixXd::Zero(m, x.dim());
            s.noise_cov = covariance;
            const Eigen::VectorXd x_vec = x.to_vector();
            for (int i = 0; i < m; ++i) {
                int col = i;
                if (i >= 5) {
                    col = x.ambiguity_index(sats[static_cast<size_t>(i - 5)]);
                    if (col < 0)
                        throw SingularInnovation("direct update on untracked ambiguity");
                }
                s.predicted(i) = x_vec(col);
                s.jacobian(i, col) = 1.0;
            }
            return s;
        },
        iterations, 1e-14);
}

}  // namespace gnssfg
