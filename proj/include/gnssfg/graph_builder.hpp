#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gnssfg/gnc.hpp"
#include "gnssfg/graph.hpp"
#include "gnssfg/scenario.hpp"
#include "gnssfg/switchable.hpp"

namespace gnssfg {

enum class KernelType { L2, Huber, Cauchy, Switch, Dcs, MaxMixture, Gnc };

inline const char* to_string(KernelType t) {
    switch (t) {
        case KernelType::L2: return "l2";
        case KernelType::Huber: return "huber";
        case KernelType::Cauchy: return "cauchy";
        case KernelType::Switch: return "switch";
        case KernelType::Dcs: return "dcs";
        case KernelType::MaxMixture: return "max_mixture";
        case KernelType::Gnc: return "gnc";
    }
    return "?";
}

/// Configured robust kernel for the measurement factors of a run.
struct KernelConfig {
    KernelType type = KernelType::L2;
    double huber_delta = 1.345;
    double cauchy_c = 2.3849;
    double dcs_phi = 1.0;
    std::vector<MaxMixtureComponent> maxmix_components = {{0.9, 1.0}, {0.1, 100.0}};
    double gnc_c = 3.0;
    double gnc_mu_initial = 0.0;  // <= 0: automatic
    double gnc_mu_update_factor = 1.4;
    double gnc_mu_final = 1.0;
    double switch_prior_mean = 1.0;
    double switch_prior_sigma = 0.1;
    std::optional<double> switch_transition_sigma;

    RobustKernel measurement_kernel() const {
        switch (type) {
            case KernelType::Huber: return HuberKernel{huber_delta};
            case KernelType::Cauchy: return CauchyKernel{cauchy_c};
            case KernelType::Dcs: return DcsKernel{dcs_phi};
            case KernelType::MaxMixture: return MaxMixtureKernel{maxmix_components};
            case KernelType::Gnc: return GncKernel{gnc_c, gnc_mu_final};
            default: return L2Kernel{};  // L2 and Switch (augmented later)
        }
    }

    GncSchedule gnc_schedule(const SolverOptions& inner) const {
        return GncSchedule{gnc_mu_initial, gnc_mu_update_factor, gnc_mu_final, inner};
    }
};

/**
 * @brief The estimator-side model: measurement sigmas, motion process
 * densities, and the epoch-0 prior spread.
 *
 * Nonpositive sigma entries inherit the scenario's generation sigmas
 * (floored at 1e-3 so zero-noise scenarios still whiten); this keeps the
 * estimator consistent with the simulator unless deliberately overridden.
 */
struct EstimatorModel {
    double pseudorange_sigma = -1.0;
    double phase_sigma = -1.0;
    double position_walk_sigma = 5.0;  // +inf leaves position free between epochs
    double clock_walk_sigma = -1.0;
    double tropo_walk_sigma = -1.0;
    double ambiguity_walk_sigma = 1e-4;
    double prior_position_sigma = 100.0;  // loose anchor on epoch 0
    double prior_clock_sigma = 1000.0;
    double prior_tropo_sigma = 10.0;
    double prior_ambiguity_sigma = 100.0;
    bool use_phase = true;  // only applies when the scenario carries phase
    KernelConfig kernel;

    double resolved_pr_sigma(const ScenarioConfig& cfg) const {
        return pseudorange_sigma > 0 ? pseudorange_sigma : std::max(cfg.pseudorange_sigma, 1e-3);
    }
    double resolved_phase_sigma(const ScenarioConfig& cfg) const {
        return phase_sigma > 0 ? phase_sigma : std::max(cfg.phase_sigma, 1e-3);
    }
    MotionModel motion(const ScenarioConfig& cfg) const {
        MotionModel m;
        m.dt = cfg.dt;
        m.position_walk_sigma = position_walk_sigma;
        m.clock_walk_sigma =
            clock_walk_sigma > 0 ? clock_walk_sigma : std::max(cfg.clock_walk_sigma, 1e-3);
        m.tropo_walk_sigma =
            tropo_walk_sigma > 0 ? tropo_walk_sigma : std::max(cfg.tropo_walk_sigma, 1e-4);
        m.ambiguity_walk_sigma = ambiguity_walk_sigma;
        return m;
    }
};

/// Where each pseudorange factor came from, for outlier metrics.
struct MeasurementRef {
    int factor_id = -1;
    int epoch = 0;
    int obs_index = 0;
};

struct BuiltGraph {
    FactorGraph graph;
    Values initial;
    std::vector<MeasurementRef> pseudorange_refs;
};

/**
 * @brief Build the estimation graph for a scenario: a loose prior on epoch 0,
 * motion factors along the chain, and one measurement factor per observation,
 * with the configured robust kernel bound to the pseudorange factors.
 *
 * The initial estimate is the truth perturbed by the scenario's configured
 * initialization sigmas (deterministic in the scenario seed), and the prior
 * mean anchors the perturbed initial state, not the truth.
 */
inline BuiltGraph build_graph(const Scenario& scenario, const EstimatorModel& model) {
    if (scenario.n_epochs() == 0) throw ConfigError("scenario is empty");
    const ScenarioConfig& cfg = scenario.config;
    const bool phase = model.use_phase && cfg.with_carrier_phase;
    const double pr_sigma = model.resolved_pr_sigma(cfg);
    const double ph_sigma = model.resolved_phase_sigma(cfg);
    Rng rng(cfg.rng_seed * 2654435761ULL + 17ULL);

    BuiltGraph built;
    // Initial estimates: perturbed truth, ambiguity slots for the satellites
    // with phase at each epoch.
    for (int e = 0; e < scenario.n_epochs(); ++e) {
        const EpochState& truth = scenario.truth[static_cast<size_t>(e)];
        EpochState init;
        for (int i = 0; i < 3; ++i)
            init.position(i) = truth.position(i) + cfg.init_position_sigma * rng.normal();
        init.clock_bias = truth.clock_bias + cfg.init_clock_sigma * rng.normal();
        init.zenith_tropo = truth.zenith_tropo + cfg.init_tropo_sigma * rng.normal();
        if (phase)
            for (const auto& obs : scenario.observations[static_cast<size_t>(e)])
                if (obs.carrier_phase_range)
                    init.ambiguities[obs.sat_id] = truth.ambiguities.count(obs.sat_id)
                                                       ? truth.ambiguities.at(obs.sat_id) +
                                                             cfg.init_ambiguity_sigma * rng.normal()
                                                       : 0.0;
        built.graph.add_variable(VariableKey::state(e), init);
        built.initial.emplace(VariableKey::state(e), std::move(init));
    }

    // Loose prior anchoring epoch 0 at the initial estimate.
    {
        const EpochState& anchor = as_state(built.initial, VariableKey::state(0));
        Eigen::VectorXd sigmas(anchor.dim());
        sigmas(0) = sigmas(1) = sigmas(2) = model.prior_position_sigma;
        sigmas(3) = model.prior_clock_sigma;
        sigmas(4) = model.prior_tropo_sigma;
        for (int i = 5; i < anchor.dim(); ++i) sigmas(i) = model.prior_ambiguity_sigma;
        built.graph.add_factor(prior_factor(
            VariableKey::state(0), anchor,
            sigmas.array().square().matrix().asDiagonal().toDenseMatrix()));
    }

    const MotionModel motion = model.motion(cfg);
    for (int e = 1; e < scenario.n_epochs(); ++e)
        built.graph.add_factor(
            between_factor(VariableKey::state(e - 1), VariableKey::state(e), motion));

    const RobustKernel pr_kernel = model.kernel.measurement_kernel();
    std::vector<int> pseudorange_ids;
    for (int e = 0; e < scenario.n_epochs(); ++e) {
        const auto& epoch_obs = scenario.observations[static_cast<size_t>(e)];
        for (size_t i = 0; i < epoch_obs.size(); ++i) {
            const int id = built.graph.add_factor(
                pseudorange_factor(VariableKey::state(e), epoch_obs[i], pr_sigma, pr_kernel));
            built.pseudorange_refs.push_back({id, e, static_cast<int>(i)});
            pseudorange_ids.push_back(id);
            if (phase && epoch_obs[i].carrier_phase_range)
                built.graph.add_factor(
                    carrier_phase_factor(VariableKey::state(e), epoch_obs[i], ph_sigma));
        }
    }

    if (model.kernel.type == KernelType::Switch) {
        built.graph = augment_with_switches(
            std::move(built.graph), pseudorange_ids, model.kernel.switch_prior_mean,
            model.kernel.switch_prior_sigma, model.kernel.switch_transition_sigma);
        for (const auto& [key, value] : built.graph.variables())
            if (key.kind == VariableKind::SwitchVar) built.initial.emplace(key, value);
    }
    return built;
}

}  // namespace gnssfg
