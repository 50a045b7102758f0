#pragma once

#include <map>
#include <vector>

#include "gnssfg/gnc.hpp"
#include "gnssfg/irls.hpp"
#include "gnssfg/marginalization.hpp"
#include "gnssfg/solver.hpp"

namespace gnssfg {

struct WindowConfig {
    int lag = 5;  // number of epochs kept in the window

    void validate() const {
        if (lag < 1) throw ConfigError("window lag must be >= 1");
    }
};

enum class SolveMethod { GaussNewton, LevenbergMarquardt, Irls, Gnc };

struct WindowSolverConfig {
    SolveMethod method = SolveMethod::LevenbergMarquardt;
    SolverOptions options;
    GncSchedule gnc;
};

/**
 * @brief Fixed-lag smoother: optimize a sliding window, marginalize the rest.
 *
 * Epochs are appended in order; after each optimization the oldest epoch is
 * eliminated once the window exceeds the configured lag, leaving a dense
 * marginal prior on the boundary. The marginal prior is linearized once at
 * marginalization time and never relinearized, which is exact for linear
 * graphs and the standard fixed-lag approximation otherwise. Switch
 * variables are dropped together with their epoch; their final values are
 * retained for inspection.
 */
class FixedLagSmoother {
public:
    explicit FixedLagSmoother(WindowConfig window, WindowSolverConfig solver = {})
        : window_(window), solver_(solver) {
        window_.validate();
        solver_.options.validate();
    }

    /// Append one epoch (its variables and factors), optimize the window,
    /// and marginalize epochs that fell out of the lag.
    SolveReport slide(int epoch, const Values& new_variables,
                      const std::vector<Factor>& new_factors) {
        if (has_epochs_ && epoch != latest_epoch_ + 1)
            throw EpochOrderError("expected epoch " + std::to_string(latest_epoch_ + 1) +
                                  ", got " + std::to_string(epoch));
        for (const auto& [key, value] : new_variables) {
            if (key.epoch != epoch)
                throw EpochOrderError("variable " + to_string(key) +
                                      " does not belong to epoch " + std::to_string(epoch));
            graph_.add_variable(key, value);
            estimate_.emplace(key, value);
        }
        for (Factor f : new_factors) {
            f.id = -1;  // the window graph owns its factor ids
            graph_.add_factor(std::move(f));
        }
        if (!has_epochs_) {
            oldest_epoch_ = epoch;
            has_epochs_ = true;
        }
        latest_epoch_ = epoch;

        SolveReport report = optimize();
        estimate_ = report.estimate;

        while (latest_epoch_ - oldest_epoch_ + 1 > window_.lag) {
            std::vector<VariableKey> drop;
            for (const auto& [key, value] : graph_.variables())
                if (key.epoch == oldest_epoch_) drop.push_back(key);
            for (const auto& key : drop)
                if (key.kind == VariableKind::SwitchVar)
                    retired_switches_.emplace(key, as_scalar(estimate_, key));
            MarginalizationResult reduced = marginalize(graph_, estimate_, drop);
            graph_ = std::move(reduced.graph);
            for (const auto& key : drop) estimate_.erase(key);
            ++oldest_epoch_;
        }
        return report;
    }

    const FactorGraph& graph() const { return graph_; }
    const Values& estimate() const { return estimate_; }
    int oldest_epoch() const { return oldest_epoch_; }
    int latest_epoch() const { return latest_epoch_; }

    /// Switch values captured when their epoch was marginalized away.
    const std::map<VariableKey, double>& retired_switches() const { return retired_switches_; }

private:
    SolveReport optimize() {
        switch (solver_.method) {
            case SolveMethod::GaussNewton:
                return gauss_newton(graph_, estimate_, solver_.options);
            case SolveMethod::Irls:
                return irls_solve(graph_, estimate_, solver_.options);
            case SolveMethod::Gnc:
                return gnc_solve(graph_, estimate_, solver_.gnc).report;
            case SolveMethod::LevenbergMarquardt:
            default:
                return levenberg_marquardt(graph_, estimate_, solver_.options);
        }
    }

    WindowConfig window_;
    WindowSolverConfig solver_;
    FactorGraph graph_;
    Values estimate_;
    std::map<VariableKey, double> retired_switches_;
    bool has_epochs_ = false;
    int oldest_epoch_ = 0;
    int latest_epoch_ = 0;
};

}  // namespace gnssfg
