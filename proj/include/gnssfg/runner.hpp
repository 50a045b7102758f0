#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gnssfg/ekf.hpp"
#include "gnssfg/irls.hpp"
#include "gnssfg/metrics.hpp"
#include "gnssfg/run_config.hpp"
#include "gnssfg/scenario_io.hpp"
#include "gnssfg/sliding_window.hpp"

namespace gnssfg {

struct RunOutput {
    std::string name;
    std::string estimator_name;
    std::string kernel_name;
    std::vector<EpochState> estimates;  // one per epoch
    MetricsReport metrics;
    std::vector<bool> flagged;  // per pseudorange observation, epoch-major
    std::vector<std::string> warnings;
    bool converged = true;
};

namespace run_detail {

/// Outlier decision per pseudorange observation, recomputed at the final
/// per-epoch estimates. Switch constraints use the switch estimate itself
/// (below 0.5 means disabled); weight kernels flag IRLS weight < 0.25, which
/// for Geman-McClure is exactly |z| > c.
inline std::vector<bool> compute_flags(const Scenario& scenario,
                                       const std::vector<EpochState>& estimates,
                                       const KernelConfig& kernel, double pr_sigma,
                                       const std::map<VariableKey, double>* switches) {
    std::vector<bool> flags;
    const RobustKernel rk = kernel.measurement_kernel();
    for (int e = 0; e < scenario.n_epochs(); ++e) {
        const auto& epoch_obs = scenario.observations[static_cast<size_t>(e)];
        for (const auto& obs : epoch_obs) {
            bool flagged = false;
            if (kernel.type == KernelType::Switch) {
                const VariableKey key = VariableKey::switch_var(e, obs.sat_id);
                const auto it = switches ? switches->find(key) : std::map<VariableKey, double>::const_iterator{};
                if (switches && it != switches->end()) flagged = it->second < 0.5;
            } else if (kernel.type != KernelType::L2) {
                const double z =
                    (obs.pseudorange - pseudorange_predict(estimates[static_cast<size_t>(e)], obs)) /
                    pr_sigma;
                flagged = kernel_weight(rk, z) < 0.25;
            }
            flags.push_back(flagged);
        }
    }
    return flags;
}

/// Group the batch graph's factors by the epoch that introduces them, so the
/// fixed-lag smoother replays exactly the batch problem.
inline std::vector<std::vector<Factor>> factors_by_epoch(const BuiltGraph& built, int n_epochs) {
    std::vector<std::vector<Factor>> out(static_cast<size_t>(n_epochs));
    for (const auto& f : built.graph.factors()) {
        int epoch = 0;
        for (const auto& key : f.variables) epoch = std::max(epoch, key.epoch);
        out[static_cast<size_t>(epoch)].push_back(f);
    }
    return out;
}

inline std::vector<EpochState> states_from_values(const Values& values, int n_epochs) {
    std::vector<EpochState> out;
    out.reserve(static_cast<size_t>(n_epochs));
    for (int e = 0; e < n_epochs; ++e) out.push_back(as_state(values, VariableKey::state(e)));
    return out;
}

}  // namespace run_detail

/**
 * @brief Execute one estimator configuration on a scenario.
 *
 * Batch runs use Levenberg-Marquardt (L2, switch constraints), IRLS (Huber,
 * Cauchy, DCS, max-mixture), or graduated non-convexity. Fixed-lag runs feed
 * the same factors through the sliding window and report each epoch's
 * estimate at the time it was most recent. EKF modes ignore the kernel with
 * a warning.
 */
inline RunOutput execute_run(const Scenario& scenario, const RunConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    const EstimatorConfig& est = config.estimator;
    const KernelConfig& kernel = est.model.kernel;

    RunOutput out;
    out.name = config.name;
    out.estimator_name = to_string(est.type);
    out.kernel_name = to_string(kernel.type);

    Scenario working = scenario;
    if (est.dt > 0) working.config.dt = est.dt;
    const double pr_sigma = est.model.resolved_pr_sigma(working.config);

    switch (est.type) {
        case EstimatorType::Batch: {
            const BuiltGraph built = build_graph(working, est.model);
            SolveReport report;
            switch (kernel.type) {
                case KernelType::Huber:
                case KernelType::Cauchy:
                case KernelType::Dcs:
                case KernelType::MaxMixture: {
                    // Redescending kernels reject everything from a far
                    // initialization and IRLS stalls there; a short convex
                    // Huber pass first lands inside the basin.
                    Values start = built.initial;
                    if (kernel.type != KernelType::Huber) {
                        EstimatorModel warm_model = est.model;
                        warm_model.kernel = KernelConfig{};
                        warm_model.kernel.type = KernelType::Huber;
                        const BuiltGraph warm = build_graph(working, warm_model);
                        SolverOptions warm_opts = config.solver;
                        warm_opts.max_iterations = std::min(20, config.solver.max_iterations);
                        start = irls_solve(warm.graph, warm.initial, warm_opts).estimate;
                    }
                    report = irls_solve(built.graph, start, config.solver);
                    break;
                }
                case KernelType::Gnc:
                    report = gnc_solve(built.graph, built.initial,
                                       kernel.gnc_schedule(config.solver))
                                 .report;
                    break;
                default:
                    report = levenberg_marquardt(built.graph, built.initial, config.solver);
                    break;
            }
            out.converged = report.converged;
            out.metrics.iterations_total = report.iterations;
            out.estimates = run_detail::states_from_values(report.estimate, working.n_epochs());
            std::map<VariableKey, double> switches;
            if (kernel.type == KernelType::Switch)
                for (const auto& [key, value] : report.estimate)
                    if (key.kind == VariableKind::SwitchVar)
                        switches.emplace(key, std::get<double>(value));
            out.flagged = run_detail::compute_flags(working, out.estimates, kernel, pr_sigma,
                                                    &switches);
            break;
        }
        case EstimatorType::FixedLag: {
            const BuiltGraph built = build_graph(working, est.model);
            const auto per_epoch = run_detail::factors_by_epoch(built, working.n_epochs());
            WindowSolverConfig solver_cfg;
            solver_cfg.options = config.solver;
            solver_cfg.gnc = kernel.gnc_schedule(config.solver);
            switch (kernel.type) {
                case KernelType::Huber:
                case KernelType::Cauchy:
                case KernelType::Dcs:
                case KernelType::MaxMixture:
                    solver_cfg.method = SolveMethod::Irls;
                    break;
                case KernelType::Gnc: solver_cfg.method = SolveMethod::Gnc; break;
                default: solver_cfg.method = SolveMethod::LevenbergMarquardt; break;
            }
            FixedLagSmoother smoother(WindowConfig{est.lag}, solver_cfg);
            bool all_converged = true;
            for (int e = 0; e < working.n_epochs(); ++e) {
                Values new_vars;
                for (const auto& [key, value] : built.initial)
                    if (key.epoch == e) new_vars.emplace(key, value);
                const SolveReport report =
                    smoother.slide(e, new_vars, per_epoch[static_cast<size_t>(e)]);
                all_converged = all_converged && report.converged;
                out.metrics.iterations_total += report.iterations;
                out.estimates.push_back(as_state(report.estimate, VariableKey::state(e)));
            }
            out.converged = all_converged;
            std::map<VariableKey, double> switches = smoother.retired_switches();
            for (const auto& [key, value] : smoother.estimate())
                if (key.kind == VariableKind::SwitchVar)
                    switches.emplace(key, std::get<double>(value));
            out.flagged = run_detail::compute_flags(working, out.estimates, kernel, pr_sigma,
                                                    &switches);
            break;
        }
        case EstimatorType::Ekf:
        case EstimatorType::Iekf: {
            if (kernel.type != KernelType::L2)
                out.warnings.push_back("kernel '" + std::string(to_string(kernel.type)) +
                                       "' is ignored by the " + out.estimator_name + " estimator");
            const int iterations = est.type == EstimatorType::Iekf ? est.iterations : 1;
            // Same deterministic initialization draw as the graph builders.
            EstimatorModel init_model = est.model;
            const BuiltGraph built = build_graph(working, init_model);
            const EpochState init0 = as_state(built.initial, VariableKey::state(0));
            Eigen::VectorXd prior_sigmas(init0.dim());
            prior_sigmas(0) = prior_sigmas(1) = prior_sigmas(2) = est.model.prior_position_sigma;
            prior_sigmas(3) = est.model.prior_clock_sigma;
            prior_sigmas(4) = est.model.prior_tropo_sigma;
            for (int i = 5; i < init0.dim(); ++i) prior_sigmas(i) = est.model.prior_ambiguity_sigma;
            FilterState state = FilterState::from_sigmas(init0, prior_sigmas);

            MeasurementNoise noise;
            noise.pseudorange_sigma = pr_sigma;
            noise.phase_sigma = est.model.resolved_phase_sigma(working.config);
            noise.use_phase = est.model.use_phase && working.config.with_carrier_phase;
            const MotionModel motion = est.model.motion(working.config);
            for (int e = 0; e < working.n_epochs(); ++e) {
                if (e > 0) state = ekf_predict(state, motion);
                const auto& epoch_obs = working.observations[static_cast<size_t>(e)];
                if (!epoch_obs.empty())
                    state = ekf_update(state, epoch_obs, noise, iterations);
                out.metrics.iterations_total += iterations;
                out.estimates.push_back(state.mean);
            }
            out.flagged.assign(flatten_labels(working).size(), false);
            break;
        }
    }

    const MetricsReport base = compute_metrics(working, out.estimates);
    out.metrics.per_epoch_position_error = base.per_epoch_position_error;
    out.metrics.horizontal_rmse = base.horizontal_rmse;
    out.metrics.vertical_rmse = base.vertical_rmse;
    out.metrics.position_rmse = base.position_rmse;
    out.metrics.clock_rmse = base.clock_rmse;
    if (kernel.type != KernelType::L2 && est.type != EstimatorType::Ekf &&
        est.type != EstimatorType::Iekf) {
        out.metrics.has_outlier_metrics = true;
        out.metrics.outliers = count_outcomes(flatten_labels(working), out.flagged);
    }
    out.metrics.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline Scenario resolve_scenario(const std::optional<ScenarioConfig>& inline_cfg,
                                 const std::optional<std::string>& path) {
    if (inline_cfg) return generate(*inline_cfg);
    return load_scenario(*path);
}

// --------------------------------------------------------------------------
// Output writing. Estimates go to a delimited text file, the metrics summary
// to a JSON document with stable field ordering. Wall time is kept out of
// the files so identical runs produce identical bytes.
// --------------------------------------------------------------------------

inline void write_estimates(const RunOutput& out, const Scenario& scenario,
                            const std::string& path) {
    std::ofstream file(path);
    if (!file) throw ConfigError("cannot open " + path + " for writing");
    file << "epoch,x,y,z,clock,tropo,position_error\n";
    for (size_t e = 0; e < out.estimates.size(); ++e) {
        const auto& s = out.estimates[e];
        file << e << ',' << detail::fmt17(s.position.x()) << ',' << detail::fmt17(s.position.y())
             << ',' << detail::fmt17(s.position.z()) << ',' << detail::fmt17(s.clock_bias) << ','
             << detail::fmt17(s.zenith_tropo) << ','
             << detail::fmt17(out.metrics.per_epoch_position_error[e]) << '\n';
    }
    (void)scenario;
}

inline nlohmann::ordered_json metrics_to_json(const RunOutput& out) {
    nlohmann::ordered_json j;
    j["name"] = out.name;
    j["estimator"] = out.estimator_name;
    j["kernel"] = out.kernel_name;
    j["converged"] = out.converged;
    j["horizontal_rmse"] = out.metrics.horizontal_rmse;
    j["vertical_rmse"] = out.metrics.vertical_rmse;
    j["position_rmse"] = out.metrics.position_rmse;
    j["clock_rmse"] = out.metrics.clock_rmse;
    j["iterations_total"] = out.metrics.iterations_total;
    if (out.metrics.has_outlier_metrics) {
        j["outlier_precision"] = out.metrics.outliers.precision();
        j["outlier_recall"] = out.metrics.outliers.recall();
        j["outlier_true_positives"] = out.metrics.outliers.true_positives;
        j["outlier_false_positives"] = out.metrics.outliers.false_positives;
        j["outlier_false_negatives"] = out.metrics.outliers.false_negatives;
    }
    j["per_epoch_position_error"] = out.metrics.per_epoch_position_error;
    if (!out.warnings.empty()) j["warnings"] = out.warnings;
    return j;
}

inline void write_run_outputs(const RunOutput& out, const Scenario& scenario,
                              const std::string& prefix) {
    write_estimates(out, scenario, prefix + ".estimates.csv");
    std::ofstream file(prefix + ".metrics.json");
    if (!file) throw ConfigError("cannot open " + prefix + ".metrics.json for writing");
    file << metrics_to_json(out).dump(2) << '\n';
}

inline std::string compare_table(const std::vector<RunOutput>& rows) {
    std::string table =
        "name,estimator,kernel,horizontal_rmse,position_rmse,clock_rmse,"
        "outlier_precision,outlier_recall,iterations\n";
    char line[512];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%s,%s,%.6g,%.6g,%.6g,%.4g,%.4g,%d\n",
                      r.name.c_str(), r.estimator_name.c_str(), r.kernel_name.c_str(),
                      r.metrics.horizontal_rmse, r.metrics.position_rmse, r.metrics.clock_rmse,
                      r.metrics.has_outlier_metrics ? r.metrics.outliers.precision() : 1.0,
                      r.metrics.has_outlier_metrics ? r.metrics.outliers.recall() : 1.0,
                      r.metrics.iterations_total);
        table += line;
    }
    return table;
}

/// Run every configuration against the shared scenario and emit one table row
/// per run.
inline std::vector<RunOutput> execute_compare(const CompareConfig& config) {
    if (config.runs.empty()) throw ConfigError("compare: empty run list");
    const Scenario scenario = resolve_scenario(config.scenario, config.scenario_path);
    std::vector<RunOutput> rows;
    rows.reserve(config.runs.size());
    for (const auto& run : config.runs) rows.push_back(execute_run(scenario, run));
    return rows;
}

}  // namespace gnssfg
