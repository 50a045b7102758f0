#include <doctest.h>

#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace gnssfg;
using helpers::make_state;

TEST_CASE("add_variable basics") {
    FactorGraph graph;
    graph.add_variable(VariableKey::state(0), make_state(0, 0, 0));
    CHECK(graph.variables().size() == 1);

    CHECK_THROWS_AS(graph.add_variable(VariableKey::state(0), make_state(1, 1, 1)),
                    DuplicateVariable);

    graph.add_variable(VariableKey::switch_var(3, "G07"), 1.0);
    CHECK(graph.variables().size() == 2);
    CHECK(as_scalar(graph.variables(), VariableKey::switch_var(3, "G07")) == 1.0);
}

TEST_CASE("add_factor validation") {
    FactorGraph graph;
    graph.add_variable(VariableKey::state(0), make_state(0, 0, 0));
    graph.add_variable(VariableKey::state(1), make_state(0, 0, 0));

    SUBCASE("well-formed prior accepted") {
        graph.add_factor(prior_factor(VariableKey::state(0), make_state(0, 0, 0),
                                      Eigen::MatrixXd::Identity(5, 5)));
        CHECK(graph.factors().size() == 1);
    }
    SUBCASE("dangling edge") {
        SatelliteObservation obs;
        obs.sat_id = "G01";
        obs.sat_position = {0, 0, 2.02e7};
        obs.pseudorange = 2.02e7;
        CHECK_THROWS_AS(graph.add_factor(pseudorange_factor(VariableKey::state(9), obs, 2.0)),
                        DanglingEdge);
    }
    SUBCASE("arity mismatch") {
        MotionModel motion;
        Factor f = between_factor(VariableKey::state(0), VariableKey::state(1), motion);
        f.variables.pop_back();
        CHECK_THROWS_AS(graph.add_factor(f), ArityError);
    }
    SUBCASE("variable-kind mismatch") {
        Factor f = switch_prior_factor(VariableKey::switch_var(0, "G01"), 1.0, 0.1);
        f.variables[0] = VariableKey::state(0);
        CHECK_THROWS_AS(graph.add_factor(f), ArityError);
    }
    SUBCASE("non-SPD noise") {
        Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(5, 5);
        CHECK_THROWS_AS(prior_factor(VariableKey::state(0), make_state(0, 0, 0), bad),
                        BadNoiseModel);
        Factor f = prior_factor(VariableKey::state(0), make_state(0, 0, 0),
                                Eigen::MatrixXd::Identity(5, 5));
        f.noise(0, 0) = -1.0;
        CHECK_THROWS_AS(graph.add_factor(f), BadNoiseModel);
    }
    SUBCASE("duplicate factor id") {
        Factor f = prior_factor(VariableKey::state(0), make_state(0, 0, 0),
                                Eigen::MatrixXd::Identity(5, 5));
        f.id = 7;
        graph.add_factor(f);
        CHECK_THROWS_AS(graph.add_factor(f), ArityError);
    }
}

TEST_CASE("linearize: prior at its mean gives zero residual and -I jacobian") {
    FactorGraph graph;
    graph.add_variable(VariableKey::state(0), make_state(0, 0, 0));
    graph.add_factor(prior_factor(VariableKey::state(0), make_state(0, 0, 0),
                                  Eigen::MatrixXd::Identity(5, 5)));
    Values estimate = graph.variables();
    const LinearizedSystem sys = linearize(graph, estimate);
    CHECK(sys.num_rows == 5);
    CHECK(sys.num_columns == 5);
    CHECK(sys.residuals.at(0).norm() == doctest::Approx(0.0));
    CHECK((sys.blocks[0].jacobian + Eigen::MatrixXd::Identity(5, 5)).norm() ==
          doctest::Approx(0.0));
}

TEST_CASE("linearize: whitened scalar slice of a sigma^2=4 prior") {
    // mean clock 0, estimate clock 2, variance 4 -> whitened residual -1
    FactorGraph graph;
    graph.add_variable(VariableKey::state(0), make_state(0, 0, 0, 2.0));
    graph.add_factor(prior_factor(VariableKey::state(0), make_state(0, 0, 0),
                                  4.0 * Eigen::MatrixXd::Identity(5, 5)));
    const LinearizedSystem sys = linearize(graph, graph.variables());
    CHECK(sys.residuals.at(0)(3) == doctest::Approx(-1.0));
}

TEST_CASE("linearize: missing estimate entry") {
    FactorGraph graph;
    graph.add_variable(VariableKey::state(0), make_state(0, 0, 0));
    Values empty;
    CHECK_THROWS_AS(linearize(graph, empty), IncompleteEstimate);
}

TEST_CASE("total_cost examples") {
    SUBCASE("all residuals zero") {
        FactorGraph graph;
        graph.add_variable(VariableKey::state(0), make_state(1, 2, 3));
        graph.add_factor(prior_factor(VariableKey::state(0), make_state(1, 2, 3),
                                      Eigen::MatrixXd::Identity(5, 5)));
        CHECK(total_cost(graph, graph.variables()) == doctest::Approx(0.0));
    }
    SUBCASE("two L2 factors with whitened residuals 3 and 4 cost 25") {
        FactorGraph graph;
        graph.add_variable(VariableKey::switch_var(0, "A"), 0.0);
        graph.add_factor(switch_prior_factor(VariableKey::switch_var(0, "A"), 3.0, 1.0));
        graph.add_factor(switch_prior_factor(VariableKey::switch_var(0, "A"), 4.0, 1.0));
        CHECK(total_cost(graph, graph.variables()) == doctest::Approx(25.0));
    }
    SUBCASE("huber kernel, whitened residual 3, delta 1 contributes 2.5") {
        FactorGraph graph;
        graph.add_variable(VariableKey::switch_var(0, "A"), 0.0);
        Factor f = switch_prior_factor(VariableKey::switch_var(0, "A"), 3.0, 1.0);
        f.kernel = HuberKernel{1.0};
        graph.add_factor(f);
        CHECK(total_cost(graph, graph.variables()) == doctest::Approx(2.5));
    }
}

TEST_CASE("whitening consistency: L2 total cost equals stacked residual norm") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        auto [graph, init] = helpers::random_linear_graph(rng, 4);
        const LinearizedSystem sys = linearize(graph, init);
        const double stacked = sys.stacked_residual().squaredNorm();
        const double cost = total_cost(graph, init);
        CHECK(std::abs(stacked - cost) <= 1e-12 * std::max(1.0, cost));
    }
}

TEST_CASE("cost is invariant under permutation of the factor list") {
    Rng rng(12);
    auto [graph, init] = helpers::random_linear_graph(rng, 4);

    FactorGraph permuted;
    for (const auto& [key, value] : graph.variables()) permuted.add_variable(key, value);
    std::vector<Factor> factors(graph.factors().begin(), graph.factors().end());
    std::reverse(factors.begin(), factors.end());
    for (Factor f : factors) {
        f.id = -1;  // reassigned in the new order
        permuted.add_factor(std::move(f));
    }
    const double a = total_cost(graph, init);
    const double b = total_cost(permuted, init);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
}

TEST_CASE("bipartite structure: factors reference only existing variables") {
    Rng rng(13);
    auto [graph, init] = helpers::random_linear_graph(rng, 3);
    for (const auto& f : graph.factors())
        for (const auto& key : f.variables) CHECK(graph.has_variable(key));
}

TEST_CASE("carrier-phase factor creates its ambiguity lazily") {
    FactorGraph graph;
    graph.add_variable(VariableKey::state(0), make_state(0, 0, 0));
    EpochState truth = make_state(0, 0, 0);
    truth.ambiguities["G05"] = 12.0;
    const SatelliteObservation obs =
        helpers::consistent_observation(truth, {0.2, 0.1, 0.9}, "G05", true);
    graph.add_factor(carrier_phase_factor(VariableKey::state(0), obs, 0.02));
    const EpochState& stored = as_state(graph.variables(), VariableKey::state(0));
    REQUIRE(stored.ambiguities.count("G05") == 1);
    CHECK(stored.dim() == 6);
}
