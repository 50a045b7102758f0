#pragma once

#include <cmath>
#include <vector>

#include "gnssfg/scenario.hpp"

namespace gnssfg {

struct OutlierCounts {
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
    int true_negatives = 0;

    /// Flagged-nothing against no outliers counts as perfect.
    double precision() const {
        const int denom = true_positives + false_positives;
        return denom == 0 ? 1.0 : static_cast<double>(true_positives) / denom;
    }
    double recall() const {
        const int denom = true_positives + false_negatives;
        return denom == 0 ? 1.0 : static_cast<double>(true_positives) / denom;
    }
};

struct MetricsReport {
    std::vector<double> per_epoch_position_error;  // 3D, meters
    double horizontal_rmse = 0.0;
    double vertical_rmse = 0.0;
    double position_rmse = 0.0;
    double clock_rmse = 0.0;
    bool has_outlier_metrics = false;
    OutlierCounts outliers;
    int iterations_total = 0;
    double wall_time_seconds = 0.0;
};

inline MetricsReport compute_metrics(const Scenario& scenario,
                                     const std::vector<EpochState>& estimates) {
    if (static_cast<int>(estimates.size()) != scenario.n_epochs())
        throw ConfigError("estimate count does not match scenario epochs");
    MetricsReport report;
    double h2 = 0.0, v2 = 0.0, p2 = 0.0, c2 = 0.0;
    for (int e = 0; e < scenario.n_epochs(); ++e) {
        const Eigen::Vector3d err =
            estimates[static_cast<size_t>(e)].position - scenario.truth[static_cast<size_t>(e)].position;
        const double clock_err = estimates[static_cast<size_t>(e)].clock_bias -
                                 scenario.truth[static_cast<size_t>(e)].clock_bias;
        report.per_epoch_position_error.push_back(err.norm());
        h2 += err.head<2>().squaredNorm();
        v2 += err.z() * err.z();
        p2 += err.squaredNorm();
        c2 += clock_err * clock_err;
    }
    const double n = static_cast<double>(scenario.n_epochs());
    report.horizontal_rmse = std::sqrt(h2 / n);
    report.vertical_rmse = std::sqrt(v2 / n);
    report.position_rmse = std::sqrt(p2 / n);
    report.clock_rmse = std::sqrt(c2 / n);
    return report;
}

/// Compare predicted outlier flags against the simulator truth labels.
/// Both vectors are flattened epoch-major over pseudorange observations.
inline OutlierCounts count_outcomes(const std::vector<bool>& truth_labels,
                                    const std::vector<bool>& flagged) {
    if (truth_labels.size() != flagged.size())
        throw ConfigError("outlier flag count does not match label count");
    OutlierCounts c;
    for (size_t i = 0; i < truth_labels.size(); ++i) {
        if (truth_labels[i] && flagged[i]) ++c.true_positives;
        else if (!truth_labels[i] && flagged[i]) ++c.false_positives;
        else if (truth_labels[i] && !flagged[i]) ++c.false_negatives;
        else ++c.true_negatives;
    }
    return c;
}

inline std::vector<bool> flatten_labels(const Scenario& scenario) {
    std::vector<bool> flat;
    for (const auto& epoch : scenario.outlier_labels)
        flat.insert(flat.end(), epoch.begin(), epoch.end());
    return flat;
}

}  // namespace gnssfg
