#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnssfg/graph_builder.hpp"
#include "gnssfg/scenario.hpp"
#include "gnssfg/solver.hpp"

namespace gnssfg {

using Json = nlohmann::json;

enum class EstimatorType { Batch, FixedLag, Ekf, Iekf };

inline const char* to_string(EstimatorType t) {
    switch (t) {
        case EstimatorType::Batch: return "batch";
        case EstimatorType::FixedLag: return "fixed_lag";
        case EstimatorType::Ekf: return "ekf";
        case EstimatorType::Iekf: return "iekf";
    }
    return "?";
}

struct EstimatorConfig {
    EstimatorType type = EstimatorType::Batch;
    int lag = 5;          // fixed_lag
    int iterations = 25;  // iekf
    double dt = -1.0;     // needed when the scenario comes from files
    EstimatorModel model;
};

struct RunConfig {
    std::string name = "run";
    std::optional<ScenarioConfig> scenario;
    std::optional<std::string> scenario_path;
    EstimatorConfig estimator;
    SolverOptions solver;
    std::string output_path;

    void validate() const {
        if (scenario.has_value() == scenario_path.has_value())
            throw ConfigError("exactly one scenario source required: 'scenario' or 'scenario_path'");
    }
};

struct CompareConfig {
    std::optional<ScenarioConfig> scenario;
    std::optional<std::string> scenario_path;
    std::vector<RunConfig> runs;
    std::string output_path;
};

// --------------------------------------------------------------------------
// JSON parsing. Unknown keys are configuration errors, not warnings:
// a silently ignored key would invalidate a comparison.
// --------------------------------------------------------------------------

namespace cfg_detail {

inline void require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

inline void check_keys(const Json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    require_object(j, path);
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (key == a) { known = true; break; }
        if (!known) throw ConfigError(path + ": unknown key '" + key + "'");
    }
}

inline double get_num(const Json& j, const std::string& path, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_string() && v.get<std::string>() == "inf")
        return std::numeric_limits<double>::infinity();
    if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
    return v.get<double>();
}

inline int get_int(const Json& j, const std::string& path, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer())
        throw ConfigError(path + "." + key + ": expected an integer");
    return j.at(key).get<int>();
}

inline bool get_bool(const Json& j, const std::string& path, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw ConfigError(path + "." + key + ": expected a boolean");
    return j.at(key).get<bool>();
}

inline std::string get_str(const Json& j, const std::string& path, const char* key,
                           const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError(path + "." + key + ": expected a string");
    return j.at(key).get<std::string>();
}

inline Eigen::Vector3d get_vec3(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(path + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace cfg_detail

inline TrajectoryConfig parse_trajectory(const Json& j, const std::string& path) {
    using namespace cfg_detail;
    check_keys(j, path, {"type", "velocity", "waypoints"});
    TrajectoryConfig t;
    const std::string type = get_str(j, path, "type", "static");
    if (type == "static") {
        t.kind = TrajectoryConfig::Kind::Static;
    } else if (type == "constant_velocity") {
        t.kind = TrajectoryConfig::Kind::ConstantVelocity;
        if (!j.contains("velocity")) throw ConfigError(path + ": constant_velocity needs 'velocity'");
        t.velocity = get_vec3(j.at("velocity"), path + ".velocity");
    } else if (type == "waypoints") {
        t.kind = TrajectoryConfig::Kind::Waypoints;
        if (!j.contains("waypoints") || !j.at("waypoints").is_array() || j.at("waypoints").empty())
            throw ConfigError(path + ": waypoints trajectory needs a nonempty 'waypoints' array");
        for (size_t i = 0; i < j.at("waypoints").size(); ++i)
            t.waypoints.push_back(
                get_vec3(j.at("waypoints")[i], path + ".waypoints[" + std::to_string(i) + "]"));
    } else {
        throw ConfigError(path + ".type: unknown trajectory '" + type + "'");
    }
    return t;
}

inline ScenarioConfig parse_scenario(const Json& j, const std::string& path) {
    using namespace cfg_detail;
    check_keys(j, path,
               {"n_epochs", "dt", "n_satellites", "trajectory", "pseudorange_sigma",
                "phase_sigma", "with_carrier_phase", "clock_walk_sigma", "tropo_walk_sigma",
                "outlier", "rng_seed", "clock_initial", "tropo_initial", "ambiguity_spread",
                "min_elevation_deg", "max_elevation_deg", "init_position_sigma",
                "init_clock_sigma", "init_tropo_sigma", "init_ambiguity_sigma"});
    ScenarioConfig c;
    c.n_epochs = get_int(j, path, "n_epochs", c.n_epochs);
    c.dt = get_num(j, path, "dt", c.dt);
    c.n_satellites = get_int(j, path, "n_satellites", c.n_satellites);
    if (j.contains("trajectory")) c.trajectory = parse_trajectory(j.at("trajectory"), path + ".trajectory");
    c.pseudorange_sigma = get_num(j, path, "pseudorange_sigma", c.pseudorange_sigma);
    c.phase_sigma = get_num(j, path, "phase_sigma", c.phase_sigma);
    c.with_carrier_phase = get_bool(j, path, "with_carrier_phase", c.with_carrier_phase);
    c.clock_walk_sigma = get_num(j, path, "clock_walk_sigma", c.clock_walk_sigma);
    c.tropo_walk_sigma = get_num(j, path, "tropo_walk_sigma", c.tropo_walk_sigma);
    if (j.contains("outlier")) {
        const auto& o = j.at("outlier");
        check_keys(o, path + ".outlier",
                   {"probability", "bias_min", "bias_max", "elevation_dependent"});
        c.outlier.probability = get_num(o, path + ".outlier", "probability", c.outlier.probability);
        c.outlier.bias_min = get_num(o, path + ".outlier", "bias_min", c.outlier.bias_min);
        c.outlier.bias_max = get_num(o, path + ".outlier", "bias_max", c.outlier.bias_max);
        c.outlier.elevation_dependent =
            get_bool(o, path + ".outlier", "elevation_dependent", c.outlier.elevation_dependent);
    }
    c.rng_seed = static_cast<std::uint64_t>(get_num(j, path, "rng_seed", 1.0));
    c.clock_initial = get_num(j, path, "clock_initial", c.clock_initial);
    c.tropo_initial = get_num(j, path, "tropo_initial", c.tropo_initial);
    c.ambiguity_spread = get_num(j, path, "ambiguity_spread", c.ambiguity_spread);
    c.min_elevation_deg = get_num(j, path, "min_elevation_deg", c.min_elevation_deg);
    c.max_elevation_deg = get_num(j, path, "max_elevation_deg", c.max_elevation_deg);
    c.init_position_sigma = get_num(j, path, "init_position_sigma", c.init_position_sigma);
    c.init_clock_sigma = get_num(j, path, "init_clock_sigma", c.init_clock_sigma);
    c.init_tropo_sigma = get_num(j, path, "init_tropo_sigma", c.init_tropo_sigma);
    c.init_ambiguity_sigma = get_num(j, path, "init_ambiguity_sigma", c.init_ambiguity_sigma);
    c.validate();
    return c;
}

inline KernelConfig parse_kernel(const Json& j, const std::string& path) {
    using namespace cfg_detail;
    check_keys(j, path,
               {"type", "delta", "c", "phi", "components", "mu_initial", "mu_update_factor",
                "mu_final", "prior_mean", "prior_sigma", "transition_sigma"});
    KernelConfig k;
    const std::string type = get_str(j, path, "type", "l2");
    if (type == "l2") k.type = KernelType::L2;
    else if (type == "huber") k.type = KernelType::Huber;
    else if (type == "cauchy") k.type = KernelType::Cauchy;
    else if (type == "switch") k.type = KernelType::Switch;
    else if (type == "dcs") k.type = KernelType::Dcs;
    else if (type == "max_mixture") k.type = KernelType::MaxMixture;
    else if (type == "gnc") k.type = KernelType::Gnc;
    else throw ConfigError(path + ".type: unknown kernel '" + type + "'");

    k.huber_delta = get_num(j, path, "delta", k.huber_delta);
    if (k.type == KernelType::Cauchy) k.cauchy_c = get_num(j, path, "c", k.cauchy_c);
    if (k.type == KernelType::Gnc) k.gnc_c = get_num(j, path, "c", k.gnc_c);
    k.dcs_phi = get_num(j, path, "phi", k.dcs_phi);
    k.gnc_mu_initial = get_num(j, path, "mu_initial", k.gnc_mu_initial);
    k.gnc_mu_update_factor = get_num(j, path, "mu_update_factor", k.gnc_mu_update_factor);
    k.gnc_mu_final = get_num(j, path, "mu_final", k.gnc_mu_final);
    k.switch_prior_mean = get_num(j, path, "prior_mean", k.switch_prior_mean);
    k.switch_prior_sigma = get_num(j, path, "prior_sigma", k.switch_prior_sigma);
    if (j.contains("transition_sigma"))
        k.switch_transition_sigma = get_num(j, path, "transition_sigma", 0.1);
    if (j.contains("components")) {
        k.maxmix_components.clear();
        for (const auto& comp : j.at("components")) {
            check_keys(comp, path + ".components[]", {"weight", "variance"});
            k.maxmix_components.push_back(
                {get_num(comp, path + ".components[]", "weight", 1.0),
                 get_num(comp, path + ".components[]", "variance", 1.0)});
        }
        if (k.maxmix_components.empty())
            throw ConfigError(path + ".components: need at least one component");
    }
    if (!(k.huber_delta > 0) || !(k.cauchy_c > 0) || !(k.dcs_phi > 0) || !(k.gnc_c > 0))
        throw ConfigError(path + ": kernel scale parameters must be positive");
    return k;
}

inline SolverOptions parse_solver(const Json& j, const std::string& path) {
    using namespace cfg_detail;
    check_keys(j, path,
               {"max_iterations", "abs_cost_tol", "rel_cost_tol", "step_tol",
                "lm_initial_lambda", "lm_lambda_factor"});
    SolverOptions s;
    s.max_iterations = get_int(j, path, "max_iterations", s.max_iterations);
    s.abs_cost_tol = get_num(j, path, "abs_cost_tol", s.abs_cost_tol);
    s.rel_cost_tol = get_num(j, path, "rel_cost_tol", s.rel_cost_tol);
    s.step_tol = get_num(j, path, "step_tol", s.step_tol);
    s.lm_initial_lambda = get_num(j, path, "lm_initial_lambda", s.lm_initial_lambda);
    s.lm_lambda_factor = get_num(j, path, "lm_lambda_factor", s.lm_lambda_factor);
    s.validate();
    return s;
}

inline EstimatorConfig parse_estimator(const Json& j, const std::string& path) {
    using namespace cfg_detail;
    check_keys(j, path,
               {"type", "lag", "iterations", "dt", "pseudorange_sigma", "phase_sigma",
                "position_walk_sigma", "clock_walk_sigma", "tropo_walk_sigma",
                "ambiguity_walk_sigma", "prior_position_sigma", "prior_clock_sigma",
                "prior_tropo_sigma", "prior_ambiguity_sigma", "use_phase"});
    EstimatorConfig e;
    const std::string type = get_str(j, path, "type", "batch");
    if (type == "batch") e.type = EstimatorType::Batch;
    else if (type == "fixed_lag") e.type = EstimatorType::FixedLag;
    else if (type == "ekf") e.type = EstimatorType::Ekf;
    else if (type == "iekf") e.type = EstimatorType::Iekf;
    else throw ConfigError(path + ".type: unknown estimator '" + type + "'");

    e.lag = get_int(j, path, "lag", e.lag);
    e.iterations = get_int(j, path, "iterations", e.iterations);
    e.dt = get_num(j, path, "dt", e.dt);
    if (e.type == EstimatorType::FixedLag && e.lag < 1)
        throw ConfigError(path + ".lag: must be >= 1");
    if (e.type == EstimatorType::Iekf && e.iterations < 1)
        throw ConfigError(path + ".iterations: must be >= 1");
    auto& m = e.model;
    m.pseudorange_sigma = get_num(j, path, "pseudorange_sigma", m.pseudorange_sigma);
    m.phase_sigma = get_num(j, path, "phase_sigma", m.phase_sigma);
    m.position_walk_sigma = get_num(j, path, "position_walk_sigma", m.position_walk_sigma);
    m.clock_walk_sigma = get_num(j, path, "clock_walk_sigma", m.clock_walk_sigma);
    m.tropo_walk_sigma = get_num(j, path, "tropo_walk_sigma", m.tropo_walk_sigma);
    m.ambiguity_walk_sigma = get_num(j, path, "ambiguity_walk_sigma", m.ambiguity_walk_sigma);
    m.prior_position_sigma = get_num(j, path, "prior_position_sigma", m.prior_position_sigma);
    m.prior_clock_sigma = get_num(j, path, "prior_clock_sigma", m.prior_clock_sigma);
    m.prior_tropo_sigma = get_num(j, path, "prior_tropo_sigma", m.prior_tropo_sigma);
    m.prior_ambiguity_sigma = get_num(j, path, "prior_ambiguity_sigma", m.prior_ambiguity_sigma);
    m.use_phase = get_bool(j, path, "use_phase", m.use_phase);
    return e;
}

inline RunConfig parse_run_config(const Json& j, const std::string& path = "run",
                                  bool allow_scenario = true) {
    using namespace cfg_detail;
    check_keys(j, path,
               {"name", "scenario", "scenario_path", "estimator", "kernel", "solver", "output"});
    RunConfig r;
    r.name = get_str(j, path, "name", r.name);
    if (j.contains("scenario")) {
        if (!allow_scenario)
            throw ConfigError(path + ": runs in a comparison share the top-level scenario");
        r.scenario = parse_scenario(j.at("scenario"), path + ".scenario");
    }
    if (j.contains("scenario_path")) {
        if (!allow_scenario)
            throw ConfigError(path + ": runs in a comparison share the top-level scenario");
        r.scenario_path = get_str(j, path, "scenario_path", "");
    }
    if (j.contains("estimator")) r.estimator = parse_estimator(j.at("estimator"), path + ".estimator");
    if (j.contains("kernel")) r.estimator.model.kernel = parse_kernel(j.at("kernel"), path + ".kernel");
    if (j.contains("solver")) r.solver = parse_solver(j.at("solver"), path + ".solver");
    r.output_path = get_str(j, path, "output", "");
    if (allow_scenario) r.validate();
    return r;
}

inline CompareConfig parse_compare_config(const Json& j) {
    using namespace cfg_detail;
    check_keys(j, "compare", {"scenario", "scenario_path", "runs", "output"});
    CompareConfig c;
    if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario"), "compare.scenario");
    if (j.contains("scenario_path"))
        c.scenario_path = get_str(j, "compare", "scenario_path", "");
    if (c.scenario.has_value() == c.scenario_path.has_value())
        throw ConfigError("compare: exactly one scenario source required");
    if (!j.contains("runs") || !j.at("runs").is_array() || j.at("runs").empty())
        throw ConfigError("compare.runs: need at least one run configuration");
    int idx = 0;
    for (const auto& rj : j.at("runs")) {
        RunConfig r = parse_run_config(rj, "compare.runs[" + std::to_string(idx) + "]",
                                       /*allow_scenario=*/false);
        if (r.name == "run") r.name = "run" + std::to_string(idx);
        c.runs.push_back(std::move(r));
        ++idx;
    }
    c.output_path = get_str(j, "compare", "output", "");
    return c;
}

}  // namespace gnssfg
