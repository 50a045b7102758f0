#include <doctest.h>

#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace gnssfg;
using helpers::make_state;

namespace {

/// Single-variable linear factor with jacobian +I and a chosen residual,
/// built as a marginal-prior block. Used to pin down the normal-equation
/// conventions exactly.
Factor unit_jacobian_factor(const VariableKey& key, double residual_at_lin, double lin_value) {
    Factor f;
    f.kind = FactorKind::MarginalPrior;
    f.variables = {key};
    f.measurement = Eigen::VectorXd::Constant(1, residual_at_lin);
    f.data = MarginalPriorData{Eigen::MatrixXd::Identity(1, 1),
                               Eigen::VectorXd::Constant(1, residual_at_lin),
                               Eigen::VectorXd::Constant(1, lin_value),
                               {1},
                               0.0};
    return f;
}

}  // namespace

TEST_CASE("solve_normal_equations identity examples") {
    FactorGraph graph;
    const VariableKey key = VariableKey::switch_var(0, "A");
    graph.add_variable(key, 0.0);
    graph.add_factor(unit_jacobian_factor(key, -1.0, 0.0));
    const LinearizedSystem sys = linearize(graph, graph.variables());

    SUBCASE("undamped: J=I, r=-1 gives delta=1") {
        const DeltaMap delta = solve_normal_equations(sys, 0.0);
        CHECK(delta.at(key)(0) == doctest::Approx(1.0));
    }
    SUBCASE("damping 1 halves the step") {
        const DeltaMap delta = solve_normal_equations(sys, 1.0);
        CHECK(delta.at(key)(0) == doctest::Approx(0.5));
    }
}

TEST_CASE("sparse solve matches the dense normal-equation oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 4; ++trial) {
        auto [graph, init] = helpers::random_linear_graph(rng, 6);
        std::map<int, double> weights;
        for (const auto& f : graph.factors())
            weights[f.id] = 0.2 + 0.8 * rng.uniform();
        const LinearizedSystem sys = linearize(graph, init);
        const DeltaMap sparse = solve_normal_equations(sys, 0.0, weights);
        const DeltaMap dense = oracles::dense_normal_solve(graph, init, 0.0, weights);
        for (const auto& [key, d] : sparse) {
            const double scale = std::max(1.0, dense.at(key).norm());
            CHECK((d - dense.at(key)).norm() / scale <= 1e-10);
        }
    }
}

TEST_CASE("gauss-newton solves a linear graph in one iteration") {
    Rng rng(22);
    auto [graph, init] = helpers::random_linear_graph(rng, 8);
    const Values oracle = oracles::dense_linear_solution(graph, init);

    SolverOptions one_step;
    one_step.max_iterations = 1;
    const SolveReport report = gauss_newton(graph, init, one_step);
    CHECK(helpers::values_distance(report.estimate, oracle) <= 1e-10);

    const SolveReport full = gauss_newton(graph, init);
    CHECK(full.converged);
    CHECK(helpers::values_distance(full.estimate, oracle) <= 1e-10);
    CHECK(full.final_cost == doctest::Approx(total_cost(graph, full.estimate)).epsilon(1e-12));
}

TEST_CASE("gauss-newton from the optimum: one zero-step iteration") {
    Rng rng(23);
    auto [graph, init] = helpers::random_linear_graph(rng, 4);
    const Values optimum = oracles::dense_linear_solution(graph, init);
    const SolveReport report = gauss_newton(graph, optimum);
    CHECK(report.converged);
    CHECK(report.iterations == 1);
    CHECK(helpers::values_distance(report.estimate, optimum) <= 1e-9);
}

TEST_CASE("gauss-newton recovers a range measured from an overhead satellite") {
    // Height is the only loose direction; the pseudorange pins it at 10 m.
    FactorGraph graph;
    EpochState init = make_state(0, 0, 1);
    graph.add_variable(VariableKey::state(0), init);
    Eigen::VectorXd prior_sigmas(5);
    prior_sigmas << 1e-3, 1e-3, 1e6, 1e-3, 1e-3;
    graph.add_factor(prior_factor(
        VariableKey::state(0), make_state(0, 0, 1),
        prior_sigmas.array().square().matrix().asDiagonal().toDenseMatrix()));

    SatelliteObservation obs;
    obs.sat_id = "G01";
    obs.sat_position = {0, 0, 2.02e7};
    obs.elevation = kPi / 2;
    obs.pseudorange = 2.02e7 - 10.0;
    graph.add_factor(pseudorange_factor(VariableKey::state(0), obs, 2.0));

    Values start;
    start.emplace(VariableKey::state(0), init);
    const SolveReport report = gauss_newton(graph, start);
    CHECK(report.converged);
    const double solved_z = as_state(report.estimate, VariableKey::state(0)).position.z();

    const double oracle_z = oracles::minimize_1d(
        [&](double z) {
            Values probe;
            EpochState s = make_state(0, 0, z);
            probe.emplace(VariableKey::state(0), s);
            return total_cost(graph, probe);
        },
        -50.0, 100.0);
    CHECK(std::abs(solved_z - oracle_z) <= 1e-6);
    CHECK(solved_z == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("levenberg-marquardt matches gauss-newton on linear graphs") {
    Rng rng(24);
    auto [graph, init] = helpers::random_linear_graph(rng, 6);
    SolverOptions opts;
    opts.max_iterations = 100;
    opts.step_tol = 1e-14;
    opts.abs_cost_tol = 1e-16;
    opts.rel_cost_tol = 1e-15;
    const SolveReport gn = gauss_newton(graph, init);
    const SolveReport lm = levenberg_marquardt(graph, init, opts);
    CHECK(helpers::values_distance(gn.estimate, lm.estimate) <= 1e-10);
}

TEST_CASE("levenberg-marquardt survives near-degenerate geometry") {
    // Two nearly collinear satellites and an extremely loose prior: the
    // undamped normal matrix is ill conditioned, the damped one is fine.
    FactorGraph graph;
    graph.add_variable(VariableKey::state(0), make_state(0, 0, 0));
    Eigen::MatrixXd loose = 1e16 * Eigen::MatrixXd::Identity(5, 5);
    graph.add_factor(prior_factor(VariableKey::state(0), make_state(0, 0, 0), loose));
    const EpochState truth = make_state(3, -2, 1, 4);
    for (int i = 0; i < 2; ++i) {
        Eigen::Vector3d dir(0.01 * i, 0.001, 1.0);
        graph.add_factor(pseudorange_factor(
            VariableKey::state(0),
            helpers::consistent_observation(truth, dir, "G0" + std::to_string(i + 1)), 2.0));
    }
    Values init = graph.variables();
    SolveReport report;
    CHECK_NOTHROW(report = levenberg_marquardt(graph, init));
    CHECK(report.final_cost <= total_cost(graph, init) + 1e-9);
}

TEST_CASE("gauss-newton reports SingularSystem with iteration context") {
    FactorGraph graph;
    graph.add_variable(VariableKey::state(0), make_state(0, 0, 0));
    graph.add_variable(VariableKey::state(1), make_state(0, 0, 0));  // unconstrained
    graph.add_factor(prior_factor(VariableKey::state(0), make_state(0, 0, 0),
                                  Eigen::MatrixXd::Identity(5, 5)));
    try {
        gauss_newton(graph, graph.variables());
        FAIL("expected SingularSystem");
    } catch (const SingularSystem& err) {
        CHECK(std::string(err.what()).find("iteration") != std::string::npos);
    }
}

TEST_CASE("levenberg-marquardt decreases cost from a far initialization") {
    const EpochState truth = make_state(100, -250, 40, 17);
    FactorGraph graph;
    graph.add_variable(VariableKey::state(0), make_state(0, 0, 0));
    Eigen::VectorXd sig(5);
    sig << 1e3, 1e3, 1e3, 1e3, 10;
    graph.add_factor(prior_factor(VariableKey::state(0), make_state(0, 0, 0),
                                  sig.array().square().matrix().asDiagonal().toDenseMatrix()));
    const auto dirs = helpers::spread_directions(6);
    for (size_t i = 0; i < dirs.size(); ++i)
        graph.add_factor(pseudorange_factor(
            VariableKey::state(0),
            helpers::consistent_observation(truth, dirs[i], "G0" + std::to_string(i)), 2.0));

    const double initial_cost = total_cost(graph, graph.variables());
    const SolveReport report = levenberg_marquardt(graph, graph.variables());
    CHECK(report.final_cost <= initial_cost);
    for (size_t i = 1; i < report.cost_trace.size(); ++i)
        CHECK(report.cost_trace[i] < report.cost_trace[i - 1]);
}

TEST_CASE("fixed weights are equivalent to rescaled noise covariances") {
    Rng rng(25);
    const VariableKey key = VariableKey::state(0);
    FactorGraph weighted, rescaled;
    const EpochState init = helpers::random_state(rng);
    weighted.add_variable(key, init);
    rescaled.add_variable(key, init);
    std::map<int, double> weights;
    for (int i = 0; i < 4; ++i) {
        const EpochState mean = helpers::random_state(rng);
        const Eigen::MatrixXd cov = helpers::random_spd(rng, 5);
        const double w = 0.1 + 0.9 * rng.uniform();
        const int id = weighted.add_factor(prior_factor(key, mean, cov));
        weights[id] = w;
        rescaled.add_factor(prior_factor(key, mean, cov / w));
    }
    Values start;
    start.emplace(key, init);
    const SolveReport a = gauss_newton(weighted, start, {}, weights);
    const SolveReport b = gauss_newton(rescaled, start);
    CHECK(helpers::values_distance(a.estimate, b.estimate) <= 1e-12);
}

TEST_CASE("solution is invariant under factor reordering and key relabeling") {
    Rng rng(26);
    auto [graph, init] = helpers::random_linear_graph(rng, 5);
    const SolveReport base = gauss_newton(graph, init);

    SUBCASE("reversed factor insertion order") {
        FactorGraph permuted;
        for (const auto& [key, value] : graph.variables()) permuted.add_variable(key, value);
        std::vector<Factor> factors(graph.factors().begin(), graph.factors().end());
        std::reverse(factors.begin(), factors.end());
        for (Factor f : factors) {
            f.id = -1;
            permuted.add_factor(std::move(f));
        }
        const SolveReport other = gauss_newton(permuted, init);
        CHECK(helpers::values_distance(base.estimate, other.estimate) <= 1e-12);
    }
    SUBCASE("epoch labels shifted by 10") {
        auto shift = [](const VariableKey& k) {
            return VariableKey{k.kind, k.epoch + 10, k.tag};
        };
        FactorGraph relabeled;
        Values relabeled_init;
        for (const auto& [key, value] : graph.variables()) {
            relabeled.add_variable(shift(key), value);
            relabeled_init.emplace(shift(key), value);
        }
        for (Factor f : graph.factors()) {
            f.id = -1;
            for (auto& key : f.variables) key = shift(key);
            relabeled.add_factor(std::move(f));
        }
        const SolveReport other = gauss_newton(relabeled, relabeled_init);
        for (const auto& [key, value] : base.estimate) {
            const Eigen::VectorXd va = value_to_vector(value);
            const Eigen::VectorXd vb = value_to_vector(other.estimate.at(shift(key)));
            CHECK((va - vb).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}
