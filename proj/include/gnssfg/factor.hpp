#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "gnssfg/errors.hpp"
#include "gnssfg/gnss_models.hpp"
#include "gnssfg/kernels.hpp"
#include "gnssfg/values.hpp"

namespace gnssfg {

enum class FactorKind {
    Prior,
    Between,
    Pseudorange,
    CarrierPhase,
    SwitchPrior,
    SwitchTransition,
    MarginalPrior,
};

inline const char* to_string(FactorKind kind) {
    switch (kind) {
        case FactorKind::Prior: return "Prior";
        case FactorKind::Between: return "Between";
        case FactorKind::Pseudorange: return "Pseudorange";
        case FactorKind::CarrierPhase: return "CarrierPhase";
        case FactorKind::SwitchPrior: return "SwitchPrior";
        case FactorKind::SwitchTransition: return "SwitchTransition";
        case FactorKind::MarginalPrior: return "MarginalPrior";
    }
    return "?";
}

/// Whitener W with W^T W = covariance^{-1}, via the Cholesky factor of the
/// covariance. Throws BadNoiseModel unless the covariance is symmetric
/// positive definite.
inline Eigen::MatrixXd sqrt_information(const Eigen::MatrixXd& covariance) {
    if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
        throw BadNoiseModel("noise covariance must be square and nonempty");
    const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw BadNoiseModel("noise covariance must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success)
        throw BadNoiseModel("noise covariance must be positive definite");
    const int n = static_cast<int>(covariance.rows());
    return llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
}

/// Switch response: linear in s, clamped to [0, 1]. The derivative uses the
/// inward subgradient on the closed interval so a switch initialized exactly
/// at 1 still receives a de-weighting gradient.
inline double switch_response(double s) { return std::clamp(s, 0.0, 1.0); }
inline double switch_response_derivative(double s) { return (s >= 0.0 && s <= 1.0) ? 1.0 : 0.0; }

// Kind-specific payloads --------------------------------------------------

struct PriorData {
    EpochState mean;
    Eigen::MatrixXd sqrt_info;
};

struct BetweenData {
    MotionModel model;
    Eigen::VectorXd core_inv_sigma;  // per-row whitening of the core block
};

struct PseudorangeData {
    SatelliteObservation obs;
    double sigma = 1.0;
};

struct CarrierPhaseData {
    SatelliteObservation obs;
    double sigma = 1.0;
};

struct SwitchPriorData {
    double mean = 1.0;
    double sigma = 0.1;
};

struct SwitchTransitionData {
    double sigma = 0.1;
};

/// Dense linear factor produced by marginalization, already whitened:
/// residual(x) = rhs + R * (x - linearization_point) stacked over keys.
struct MarginalPriorData {
    Eigen::MatrixXd sqrt_information;  // upper trapezoidal
    Eigen::VectorXd rhs;
    Eigen::VectorXd linearization_point;
    std::vector<int> key_dims;
    double constant_cost = 0.0;  // preserves total cost at the linearization point
};

using FactorData = std::variant<PriorData, BetweenData, PseudorangeData, CarrierPhaseData,
                                SwitchPriorData, SwitchTransitionData, MarginalPriorData>;

struct FactorEval {
    Eigen::VectorXd residual;                // whitened
    std::vector<Eigen::MatrixXd> jacobians;  // whitened, one block per variable
};

/**
 * @brief One probabilistic constraint in the graph.
 *
 * Residuals follow the convention r = W * (measurement - prediction), so a
 * prior on x has Jacobian -W. Robust kernels are carried here but never
 * applied during linearization; the solvers apply them as IRLS weights.
 */
struct Factor {
    int id = -1;
    FactorKind kind = FactorKind::Prior;
    std::vector<VariableKey> variables;
    Eigen::VectorXd measurement;
    Eigen::MatrixXd noise;  // covariance
    RobustKernel kernel = L2Kernel{};
    FactorData data = PriorData{};

    bool is_measurement() const {
        return kind == FactorKind::Pseudorange || kind == FactorKind::CarrierPhase;
    }

    FactorEval evaluate(const Values& estimate, bool want_jacobians = true) const;

    double constant_cost() const {
        if (const auto* m = std::get_if<MarginalPriorData>(&data)) return m->constant_cost;
        return 0.0;
    }
};

// Factory functions --------------------------------------------------------

inline Factor prior_factor(const VariableKey& key, const EpochState& mean,
                           const Eigen::MatrixXd& covariance) {
    if (covariance.rows() != mean.dim())
        throw BadNoiseModel("prior covariance dimension does not match the mean");
    Factor f;
    f.kind = FactorKind::Prior;
    f.variables = {key};
    f.measurement = mean.to_vector();
    f.noise = covariance;
    f.data = PriorData{mean, sqrt_information(covariance)};
    return f;
}

inline Factor between_factor(const VariableKey& key_prev, const VariableKey& key_next,
                             const MotionModel& model) {
    if (key_next.epoch != key_prev.epoch + 1)
        throw EpochGapError("between factor requires consecutive epochs, got " +
                            std::to_string(key_prev.epoch) + " -> " +
                            std::to_string(key_next.epoch));
    model.validate();
    Factor f;
    f.kind = FactorKind::Between;
    f.variables = {key_prev, key_next};
    f.noise = model.core_process_noise();
    Eigen::VectorXd inv_sigma = f.noise.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::VectorXd disp = Eigen::VectorXd::Zero(f.noise.rows());
    if (model.constrains_position()) disp.head<3>() = model.position_displacement();
    f.measurement = disp;
    f.data = BetweenData{model, inv_sigma};
    return f;
}

inline Factor pseudorange_factor(const VariableKey& state_key, const SatelliteObservation& obs,
                                 double sigma, RobustKernel kernel = L2Kernel{}) {
    if (!(sigma > 0)) throw BadNoiseModel("pseudorange sigma must be positive");
    if (!(obs.elevation > 0) || obs.elevation > kPi / 2 + 1e-12)
        throw DegenerateGeometry("elevation must lie in (0, pi/2]");
    Factor f;
    f.kind = FactorKind::Pseudorange;
    f.variables = {state_key};
    f.measurement = Eigen::VectorXd::Constant(1, obs.pseudorange);
    f.noise = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
    f.kernel = std::move(kernel);
    f.data = PseudorangeData{obs, sigma};
    return f;
}

inline Factor carrier_phase_factor(const VariableKey& state_key, const SatelliteObservation& obs,
                                   double sigma, RobustKernel kernel = L2Kernel{}) {
    if (!obs.carrier_phase_range)
        throw MissingObservable("observation for " + obs.sat_id + " carries no carrier phase");
    if (!(sigma > 0)) throw BadNoiseModel("carrier phase sigma must be positive");
    if (!(obs.elevation > 0) || obs.elevation > kPi / 2 + 1e-12)
        throw DegenerateGeometry("elevation must lie in (0, pi/2]");
    Factor f;
    f.kind = FactorKind::CarrierPhase;
    f.variables = {state_key};
    f.measurement = Eigen::VectorXd::Constant(1, *obs.carrier_phase_range);
    f.noise = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
    f.kernel = std::move(kernel);
    f.data = CarrierPhaseData{obs, sigma};
    return f;
}

inline Factor switch_prior_factor(const VariableKey& switch_key, double mean, double sigma) {
    if (!(sigma > 0)) throw BadNoiseModel("switch prior sigma must be positive");
    Factor f;
    f.kind = FactorKind::SwitchPrior;
    f.variables = {switch_key};
    f.measurement = Eigen::VectorXd::Constant(1, mean);
    f.noise = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
    f.data = SwitchPriorData{mean, sigma};
    return f;
}

inline Factor switch_transition_factor(const VariableKey& switch_prev,
                                       const VariableKey& switch_next, double sigma) {
    if (!(sigma > 0)) throw BadNoiseModel("switch transition sigma must be positive");
    Factor f;
    f.kind = FactorKind::SwitchTransition;
    f.variables = {switch_prev, switch_next};
    f.measurement = Eigen::VectorXd::Zero(1);
    f.noise = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
    f.data = SwitchTransitionData{sigma};
    return f;
}

// Evaluation ----------------------------------------------------------------

namespace detail {

/// Column indices of the prior/between core components inside a state.
inline int aligned_index(const EpochState& state, int component, const std::string& sat,
                         const VariableKey& key) {
    if (component < 5) return component;
    const int idx = state.ambiguity_index(sat);
    if (idx < 0)
        throw IncompleteEstimate("state " + to_string(key) + " has no ambiguity for " + sat);
    return idx;
}

struct RangeTerms {
    double predicted = 0.0;
    Eigen::Vector3d d_position = Eigen::Vector3d::Zero();  // d(predicted)/d(position)
    double mapping = 1.0;
};

inline RangeTerms range_terms(const EpochState& state, const SatelliteObservation& obs) {
    RangeTerms t;
    t.mapping = tropo_mapping(obs.elevation);
    t.predicted = pseudorange_predict(state, obs);
    t.d_position = -line_of_sight(state, obs);
    return t;
}

}  // namespace detail

inline FactorEval Factor::evaluate(const Values& estimate, bool want_jacobians) const {
    FactorEval eval;
    switch (kind) {
        case FactorKind::Prior: {
            const auto& d = std::get<PriorData>(data);
            const EpochState& x = as_state(estimate, variables[0]);
            const int m = d.mean.dim();
            const int nx = x.dim();
            Eigen::VectorXd raw(m);
            std::vector<int> cols(m);
            const auto sats = d.mean.ambiguity_ids();
            const Eigen::VectorXd mean_vec = d.mean.to_vector();
            const Eigen::VectorXd x_vec = x.to_vector();
            for (int i = 0; i < m; ++i) {
                const std::string sat = i >= 5 ? sats[static_cast<size_t>(i - 5)] : std::string{};
                cols[i] = detail::aligned_index(x, i, sat, variables[0]);
                raw(i) = mean_vec(i) - x_vec(cols[i]);
            }
            eval.residual = d.sqrt_info * raw;
            if (want_jacobians) {
                Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, nx);
                for (int i = 0; i < m; ++i) jac.col(cols[i]) -= d.sqrt_info.col(i);
                eval.jacobians = {std::move(jac)};
            }
            break;
        }
        case FactorKind::Between: {
            const auto& d = std::get<BetweenData>(data);
            const EpochState& a = as_state(estimate, variables[0]);
            const EpochState& b = as_state(estimate, variables[1]);
            const bool with_pos = d.model.constrains_position();
            // Common ambiguities, in sorted satellite order.
            std::vector<std::string> common;
            for (const auto& [sat, value] : a.ambiguities)
                if (b.ambiguities.count(sat)) common.push_back(sat);
            const int ncore = with_pos ? 5 : 2;
            const int m = ncore + static_cast<int>(common.size());
            const double amb_inv_sigma =
                1.0 / (d.model.ambiguity_walk_sigma * std::sqrt(d.model.dt));

            Eigen::VectorXd residual(m);
            Eigen::MatrixXd ja, jb;
            if (want_jacobians) {
                ja = Eigen::MatrixXd::Zero(m, a.dim());
                jb = Eigen::MatrixXd::Zero(m, b.dim());
            }
            const Eigen::Vector3d disp = d.model.position_displacement();
            int row = 0;
            auto add_row = [&](int ca, int cb, double raw, double inv_sigma) {
                residual(row) = raw * inv_sigma;
                if (want_jacobians) {
                    ja(row, ca) = inv_sigma;
                    jb(row, cb) = -inv_sigma;
                }
                ++row;
            };
            if (with_pos)
                for (int i = 0; i < 3; ++i)
                    add_row(i, i, a.position(i) + disp(i) - b.position(i), d.core_inv_sigma(i));
            add_row(3, 3, a.clock_bias - b.clock_bias, d.core_inv_sigma(with_pos ? 3 : 0));
            add_row(4, 4, a.zenith_tropo - b.zenith_tropo, d.core_inv_sigma(with_pos ? 4 : 1));
            for (const auto& sat : common)
                add_row(a.ambiguity_index(sat), b.ambiguity_index(sat),
                        a.ambiguities.at(sat) - b.ambiguities.at(sat), amb_inv_sigma);
            eval.residual = std::move(residual);
            if (want_jacobians) eval.jacobians = {std::move(ja), std::move(jb)};
            break;
        }
        case FactorKind::Pseudorange:
        case FactorKind::CarrierPhase: {
            const bool is_phase = kind == FactorKind::CarrierPhase;
            const SatelliteObservation& obs = is_phase ? std::get<CarrierPhaseData>(data).obs
                                                       : std::get<PseudorangeData>(data).obs;
            const double sigma =
                is_phase ? std::get<CarrierPhaseData>(data).sigma : std::get<PseudorangeData>(data).sigma;
            const EpochState& x = as_state(estimate, variables[0]);
            const auto terms = detail::range_terms(x, obs);

            double predicted = terms.predicted;
            int amb_col = -1;
            if (is_phase) {
                amb_col = x.ambiguity_index(obs.sat_id);
                if (amb_col < 0)
                    throw IncompleteEstimate("state " + to_string(variables[0]) +
                                             " has no ambiguity for " + obs.sat_id);
                predicted += x.ambiguities.at(obs.sat_id);
            }
            const double raw = measurement(0) - predicted;

            double psi = 1.0, dpsi = 0.0, s = 1.0;
            const bool switched = variables.size() == 2;
            if (switched) {
                s = as_scalar(estimate, variables[1]);
                psi = switch_response(s);
                dpsi = switch_response_derivative(s);
            }
            eval.residual = Eigen::VectorXd::Constant(1, psi * raw / sigma);
            if (want_jacobians) {
                Eigen::MatrixXd jx = Eigen::MatrixXd::Zero(1, x.dim());
                jx.block<1, 3>(0, 0) = -psi / sigma * terms.d_position.transpose();
                jx(0, 3) = -psi / sigma;
                jx(0, 4) = -psi / sigma * terms.mapping;
                if (is_phase) jx(0, amb_col) = -psi / sigma;
                eval.jacobians = {std::move(jx)};
                if (switched)
                    eval.jacobians.push_back(Eigen::MatrixXd::Constant(1, 1, dpsi * raw / sigma));
            }
            break;
        }
        case FactorKind::SwitchPrior: {
            const auto& d = std::get<SwitchPriorData>(data);
            const double s = as_scalar(estimate, variables[0]);
            eval.residual = Eigen::VectorXd::Constant(1, (d.mean - s) / d.sigma);
            if (want_jacobians)
                eval.jacobians = {Eigen::MatrixXd::Constant(1, 1, -1.0 / d.sigma)};
            break;
        }
        case FactorKind::SwitchTransition: {
            const auto& d = std::get<SwitchTransitionData>(data);
            const double sa = as_scalar(estimate, variables[0]);
            const double sb = as_scalar(estimate, variables[1]);
            eval.residual = Eigen::VectorXd::Constant(1, (sa - sb) / d.sigma);
            if (want_jacobians)
                eval.jacobians = {Eigen::MatrixXd::Constant(1, 1, 1.0 / d.sigma),
                                  Eigen::MatrixXd::Constant(1, 1, -1.0 / d.sigma)};
            break;
        }
        case FactorKind::MarginalPrior: {
            const auto& d = std::get<MarginalPriorData>(data);
            Eigen::VectorXd x(d.linearization_point.size());
            int offset = 0;
            for (size_t i = 0; i < variables.size(); ++i) {
                auto it = estimate.find(variables[i]);
                if (it == estimate.end())
                    throw IncompleteEstimate("no value for " + to_string(variables[i]));
                const Eigen::VectorXd v = value_to_vector(it->second);
                if (v.size() != d.key_dims[i])
                    throw IncompleteEstimate("dimension of " + to_string(variables[i]) +
                                             " changed since marginalization");
                x.segment(offset, d.key_dims[i]) = v;
                offset += d.key_dims[i];
            }
            eval.residual = d.rhs + d.sqrt_information * (x - d.linearization_point);
            if (want_jacobians) {
                eval.jacobians.reserve(variables.size());
                offset = 0;
                for (size_t i = 0; i < variables.size(); ++i) {
                    eval.jacobians.push_back(d.sqrt_information.middleCols(offset, d.key_dims[i]));
                    offset += d.key_dims[i];
                }
            }
            break;
        }
    }
    return eval;
}

}  // namespace gnssfg
