#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gnssfg/scenario.hpp"

namespace gnssfg {

// Scenario files are line-delimited text. One observation per line:
//   epoch,sat_id,sat_x,sat_y,sat_z,pseudorange,phase_or_blank,elevation,outlier_flag
// and one truth record per line:
//   epoch,x,y,z,clock,tropo
// Floating-point fields carry 17 significant digits so a write/read round
// trip reproduces the values bit for bit.

namespace detail {

inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) {
        const auto first = field.find_first_not_of(" \t");
        const auto last = field.find_last_not_of(" \t");
        fields.push_back(first == std::string::npos ? ""
                                                    : field.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        size_t idx = 0;
        const double v = std::stod(s, &idx);
        if (idx != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric field '" + s + "' in " + context);
    }
}

}  // namespace detail

inline void write_observations(const Scenario& scenario, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    for (int epoch = 0; epoch < scenario.n_epochs(); ++epoch) {
        const auto& observations = scenario.observations[static_cast<size_t>(epoch)];
        const auto& labels = scenario.outlier_labels[static_cast<size_t>(epoch)];
        for (size_t i = 0; i < observations.size(); ++i) {
            const auto& obs = observations[i];
            out << epoch << ',' << obs.sat_id << ',' << detail::fmt17(obs.sat_position.x())
                << ',' << detail::fmt17(obs.sat_position.y()) << ','
                << detail::fmt17(obs.sat_position.z()) << ','
                << detail::fmt17(obs.pseudorange) << ',';
            if (obs.carrier_phase_range) out << detail::fmt17(*obs.carrier_phase_range);
            out << ',' << detail::fmt17(obs.elevation) << ',' << (labels[i] ? 1 : 0) << '\n';
        }
    }
}

inline void write_truth(const Scenario& scenario, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    for (int epoch = 0; epoch < scenario.n_epochs(); ++epoch) {
        const auto& t = scenario.truth[static_cast<size_t>(epoch)];
        out << epoch << ',' << detail::fmt17(t.position.x()) << ','
            << detail::fmt17(t.position.y()) << ',' << detail::fmt17(t.position.z()) << ','
            << detail::fmt17(t.clock_bias) << ',' << detail::fmt17(t.zenith_tropo) << '\n';
    }
}

inline void write_scenario(const Scenario& scenario, const std::string& prefix) {
    write_observations(scenario, prefix + ".obs.csv");
    write_truth(scenario, prefix + ".truth.csv");
}

/// Read a scenario back from its observation and truth files. Below-horizon
/// observations are rejected at ingestion. The generator configuration is
/// not stored in the files, so only structural fields of the returned
/// config (epoch count, satellite count, phase availability) are meaningful.
inline Scenario load_scenario(const std::string& obs_path, const std::string& truth_path) {
    Scenario scenario;
    std::ifstream truth_in(truth_path);
    if (!truth_in) throw ConfigError("cannot open " + truth_path);
    std::string line;
    int line_no = 0;
    while (std::getline(truth_in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        const std::string ctx = truth_path + ":" + std::to_string(line_no);
        if (f.size() != 6) throw ConfigError("expected 6 fields in " + ctx);
        const int epoch = static_cast<int>(detail::parse_double(f[0], ctx));
        if (epoch != static_cast<int>(scenario.truth.size()))
            throw ConfigError("truth epochs out of order at " + ctx);
        EpochState t;
        t.position = {detail::parse_double(f[1], ctx), detail::parse_double(f[2], ctx),
                      detail::parse_double(f[3], ctx)};
        t.clock_bias = detail::parse_double(f[4], ctx);
        t.zenith_tropo = detail::parse_double(f[5], ctx);
        scenario.truth.push_back(std::move(t));
    }
    if (scenario.truth.empty()) throw ConfigError("no truth records in " + truth_path);
    scenario.observations.resize(scenario.truth.size());
    scenario.outlier_labels.resize(scenario.truth.size());

    std::ifstream obs_in(obs_path);
    if (!obs_in) throw ConfigError("cannot open " + obs_path);
    line_no = 0;
    bool any_phase = false;
    int max_sats = 0;
    while (std::getline(obs_in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        const std::string ctx = obs_path + ":" + std::to_string(line_no);
        if (f.size() != 9) throw ConfigError("expected 9 fields in " + ctx);
        const int epoch = static_cast<int>(detail::parse_double(f[0], ctx));
        if (epoch < 0 || epoch >= scenario.n_epochs())
            throw ConfigError("observation epoch out of range at " + ctx);
        SatelliteObservation obs;
        obs.sat_id = f[1];
        obs.sat_position = {detail::parse_double(f[2], ctx), detail::parse_double(f[3], ctx),
                            detail::parse_double(f[4], ctx)};
        obs.pseudorange = detail::parse_double(f[5], ctx);
        if (!f[6].empty()) {
            obs.carrier_phase_range = detail::parse_double(f[6], ctx);
            any_phase = true;
        }
        obs.elevation = detail::parse_double(f[7], ctx);
        const double flag = detail::parse_double(f[8], ctx);
        if (obs.elevation <= 0.0) continue;  // below horizon: rejected
        if (!(obs.pseudorange > 0.0)) throw ConfigError("nonpositive pseudorange at " + ctx);
        scenario.observations[static_cast<size_t>(epoch)].push_back(std::move(obs));
        scenario.outlier_labels[static_cast<size_t>(epoch)].push_back(flag != 0.0);
    }
    for (const auto& epoch_obs : scenario.observations)
        max_sats = std::max(max_sats, static_cast<int>(epoch_obs.size()));
    scenario.config.n_epochs = scenario.n_epochs();
    scenario.config.n_satellites = std::max(4, max_sats);
    scenario.config.with_carrier_phase = any_phase;
    return scenario;
}

inline Scenario load_scenario(const std::string& prefix) {
    return load_scenario(prefix + ".obs.csv", prefix + ".truth.csv");
}

}  // namespace gnssfg
