#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_helpers.hpp"

using namespace gnssfg;

namespace {

Json parse(const std::string& text) { return Json::parse(text); }

const char* kRunConfigText = R"({
  "name": "demo",
  "scenario": {
    "n_epochs": 6, "n_satellites": 6, "rng_seed": 9,
    "pseudorange_sigma": 2.0,
    "outlier": {"probability": 0.1, "bias_min": 20, "bias_max": 40}
  },
  "estimator": {"type": "batch"},
  "kernel": {"type": "huber", "delta": 1.345},
  "solver": {"max_iterations": 60}
})";

int run_cli(const std::string& args) {
    const std::string command = std::string(GNSSFG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("run config parsing") {
    SUBCASE("happy path") {
        const RunConfig cfg = parse_run_config(parse(kRunConfigText));
        CHECK(cfg.name == "demo");
        REQUIRE(cfg.scenario.has_value());
        CHECK(cfg.scenario->n_epochs == 6);
        CHECK(cfg.estimator.model.kernel.type == KernelType::Huber);
        CHECK(cfg.solver.max_iterations == 60);
    }
    SUBCASE("unknown top-level key") {
        Json j = parse(kRunConfigText);
        j["estimattor"] = Json::object();
        CHECK_THROWS_AS(parse_run_config(j), ConfigError);
    }
    SUBCASE("unknown nested key") {
        Json j = parse(kRunConfigText);
        j["scenario"]["n_epoch"] = 3;
        CHECK_THROWS_AS(parse_run_config(j), ConfigError);
    }
    SUBCASE("both scenario sources") {
        Json j = parse(kRunConfigText);
        j["scenario_path"] = "somewhere";
        CHECK_THROWS_AS(parse_run_config(j), ConfigError);
    }
    SUBCASE("no scenario source") {
        Json j = parse(kRunConfigText);
        j.erase("scenario");
        CHECK_THROWS_AS(parse_run_config(j), ConfigError);
    }
    SUBCASE("bad kernel parameters") {
        Json j = parse(kRunConfigText);
        j["kernel"]["delta"] = -1.0;
        CHECK_THROWS_AS(parse_run_config(j), ConfigError);
    }
}

TEST_CASE("compare config parsing") {
    SUBCASE("runs may not restate the scenario") {
        const Json j = parse(R"({
          "scenario": {"n_epochs": 3},
          "runs": [{"name": "a", "scenario": {"n_epochs": 4}}]
        })");
        CHECK_THROWS_AS(parse_compare_config(j), ConfigError);
    }
    SUBCASE("empty run list") {
        const Json j = parse(R"({"scenario": {"n_epochs": 3}, "runs": []})");
        CHECK_THROWS_AS(parse_compare_config(j), ConfigError);
    }
}

TEST_CASE("identical configs produce identical outputs") {
    const RunConfig cfg = parse_run_config(parse(kRunConfigText));
    const Scenario scenario = resolve_scenario(cfg.scenario, cfg.scenario_path);
    const RunOutput a = execute_run(scenario, cfg);
    const RunOutput b = execute_run(scenario, cfg);
    REQUIRE(a.estimates.size() == b.estimates.size());
    for (size_t e = 0; e < a.estimates.size(); ++e)
        CHECK(helpers::state_distance(a.estimates[e], b.estimates[e]) == 0.0);
    CHECK(a.metrics.horizontal_rmse == b.metrics.horizontal_rmse);
    CHECK(a.flagged == b.flagged);
    CHECK(metrics_to_json(a).dump() == metrics_to_json(b).dump());
}

TEST_CASE("fixed lag covering the whole trajectory matches batch") {
    RunConfig cfg = parse_run_config(parse(kRunConfigText));
    cfg.estimator.model.kernel.type = KernelType::L2;
    cfg.solver.max_iterations = 200;
    cfg.solver.step_tol = 1e-13;
    cfg.solver.abs_cost_tol = 1e-15;
    cfg.solver.rel_cost_tol = 1e-14;
    const Scenario scenario = resolve_scenario(cfg.scenario, cfg.scenario_path);

    RunConfig batch = cfg;
    batch.estimator.type = EstimatorType::Batch;
    RunConfig window = cfg;
    window.estimator.type = EstimatorType::FixedLag;
    window.estimator.lag = 100;

    const RunOutput a = execute_run(scenario, batch);
    const RunOutput b = execute_run(scenario, window);
    // The final window covers everything: both solve the same problem. Polish
    // each result with a few Gauss-Newton steps to squeeze out the solvers'
    // stopping slack, then compare at the shared optimum.
    const BuiltGraph built = build_graph(scenario, cfg.estimator.model);
    auto polish = [&](const std::vector<EpochState>& estimates) {
        Values values = built.initial;
        for (int e = 0; e < scenario.n_epochs(); ++e)
            values.at(VariableKey::state(e)) = estimates[static_cast<size_t>(e)];
        SolverOptions tight;
        tight.max_iterations = 10;
        return gauss_newton(built.graph, values, tight).estimate;
    };
    CHECK(helpers::state_distance(a.estimates.back(), b.estimates.back()) <= 1e-4);
    // Agreement down to the normal-equation conditioning floor (~1e-8 here);
    // exact 1e-9 equivalence is covered by the linear-graph window tests.
    CHECK(helpers::values_distance(polish(a.estimates), polish(b.estimates)) <= 1e-7);
}

TEST_CASE("clean-scenario horizontal RMSE against the geometry heuristic") {
    // Recorded, not asserted: the rule-of-thumb bound 3*sigma/sqrt(n_sats).
    std::vector<double> rmses;
    for (int seed = 1; seed <= 20; ++seed) {
        ScenarioConfig scenario_cfg;
        scenario_cfg.n_epochs = 10;
        scenario_cfg.n_satellites = 8;
        scenario_cfg.pseudorange_sigma = 2.0;
        scenario_cfg.rng_seed = static_cast<std::uint64_t>(seed) * 13 + 1;
        RunConfig cfg;
        cfg.scenario = scenario_cfg;
        const Scenario scenario = generate(scenario_cfg);
        rmses.push_back(execute_run(scenario, cfg).metrics.horizontal_rmse);
    }
    std::sort(rmses.begin(), rmses.end());
    const double bound = 3.0 * 2.0 / std::sqrt(8.0);
    MESSAGE("clean batch-L2 horizontal RMSE over 20 seeds: median "
            << rmses[10] << " m, max " << rmses.back() << " m; 3*sigma/sqrt(n) = " << bound
            << " m");
    for (double r : rmses) CHECK(std::isfinite(r));
}

TEST_CASE("compare: paired estimator runs on one scenario") {
    SUBCASE("iterated filter and batch L2 agree on a clean zero-noise scenario") {
        // With exact measurements both are optimal; the filter must iterate
        // its update, since a single linearization leaves a ~1e-5 bias that
        // its own overconfident covariance then preserves.
        CompareConfig cmp;
        ScenarioConfig scenario_cfg;
        scenario_cfg.n_epochs = 8;
        scenario_cfg.n_satellites = 7;
        scenario_cfg.rng_seed = 21;
        scenario_cfg.pseudorange_sigma = 0.0;
        scenario_cfg.clock_walk_sigma = 0.0;
        scenario_cfg.tropo_walk_sigma = 0.0;
        cmp.scenario = scenario_cfg;
        RunConfig iekf;
        iekf.name = "iekf";
        iekf.estimator.type = EstimatorType::Iekf;
        iekf.estimator.iterations = 25;
        RunConfig batch;
        batch.name = "batch_l2";
        batch.estimator.type = EstimatorType::Batch;
        batch.solver.max_iterations = 100;
        batch.solver.step_tol = 1e-12;
        batch.solver.abs_cost_tol = 1e-16;
        batch.solver.rel_cost_tol = 1e-15;
        // Moderate sigmas keep the information ratios well conditioned; the
        // zero-noise default floor (1 mm) against 100-1000 m priors costs
        // ~5 digits of gain precision in double.
        for (RunConfig* r : {&iekf, &batch}) {
            r->estimator.model.pseudorange_sigma = 0.01;
            r->estimator.model.prior_position_sigma = 10.0;
            r->estimator.model.prior_clock_sigma = 10.0;
            r->estimator.model.prior_tropo_sigma = 1.0;
        }
        cmp.runs = {iekf, batch};
        const std::vector<RunOutput> rows = execute_compare(cmp);
        REQUIRE(rows.size() == 2);
        CHECK(helpers::state_distance(rows[0].estimates.back(), rows[1].estimates.back()) <=
              1e-6);
    }
    SUBCASE("gnc strictly beats L2 under 20% outliers") {
        CompareConfig cmp;
        ScenarioConfig scenario_cfg;
        scenario_cfg.n_epochs = 15;
        scenario_cfg.n_satellites = 8;
        scenario_cfg.rng_seed = 22;
        scenario_cfg.pseudorange_sigma = 2.0;
        scenario_cfg.outlier.probability = 0.2;
        scenario_cfg.outlier.bias_min = 20.0;
        scenario_cfg.outlier.bias_max = 60.0;
        cmp.scenario = scenario_cfg;
        RunConfig l2;
        l2.name = "l2";
        RunConfig gnc;
        gnc.name = "gnc";
        gnc.estimator.model.kernel.type = KernelType::Gnc;
        cmp.runs = {l2, gnc};
        const std::vector<RunOutput> rows = execute_compare(cmp);
        MESSAGE("L2 horizontal RMSE " << rows[0].metrics.horizontal_rmse << " m vs GNC "
                                      << rows[1].metrics.horizontal_rmse << " m");
        CHECK(rows[1].metrics.horizontal_rmse < rows[0].metrics.horizontal_rmse);
        const std::string table = compare_table(rows);
        CHECK(table.find("l2,batch,l2,") != std::string::npos);
        CHECK(table.find("gnc,batch,gnc,") != std::string::npos);
    }
}

TEST_CASE("ekf ignores the kernel with a warning") {
    RunConfig cfg = parse_run_config(parse(kRunConfigText));
    cfg.estimator.type = EstimatorType::Ekf;
    const Scenario scenario = resolve_scenario(cfg.scenario, cfg.scenario_path);
    const RunOutput out = execute_run(scenario, cfg);
    REQUIRE_FALSE(out.warnings.empty());
    CHECK(out.warnings.front().find("ignored") != std::string::npos);
    CHECK_FALSE(out.metrics.has_outlier_metrics);
}

TEST_CASE("cli binary: generate, run, compare") {
    const std::string dir = "/tmp/gnssfg_cli_test";
    REQUIRE(std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str()) == 0);

    {
        std::ofstream gen(dir + "/gen.json");
        gen << R"({"scenario": {"n_epochs": 4, "n_satellites": 6, "rng_seed": 3}})";
    }
    CHECK(run_cli("generate --config " + dir + "/gen.json --output " + dir + "/scene") == 0);
    CHECK(std::ifstream(dir + "/scene.obs.csv").good());
    CHECK(std::ifstream(dir + "/scene.truth.csv").good());

    SUBCASE("seed override is deterministic") {
        CHECK(run_cli("generate --config " + dir + "/gen.json --seed 11 --output " + dir +
                      "/a") == 0);
        CHECK(run_cli("generate --config " + dir + "/gen.json --seed 11 --output " + dir +
                      "/b") == 0);
        CHECK(slurp(dir + "/a.obs.csv") == slurp(dir + "/b.obs.csv"));
        CHECK(slurp(dir + "/a.obs.csv") != slurp(dir + "/scene.obs.csv"));
    }

    {
        std::ofstream run(dir + "/run.json");
        run << R"({
          "scenario_path": ")" << dir << R"(/scene",
          "estimator": {"type": "batch", "dt": 1.0, "pseudorange_sigma": 2.0},
          "kernel": {"type": "l2"}
        })";
    }
    CHECK(run_cli("run --config " + dir + "/run.json --output " + dir + "/out") == 0);
    CHECK(std::ifstream(dir + "/out.metrics.json").good());
    CHECK(std::ifstream(dir + "/out.estimates.csv").good());
    {
        const std::string metrics = slurp(dir + "/out.metrics.json");
        CHECK(metrics.find("horizontal_rmse") != std::string::npos);
        const std::string estimates = slurp(dir + "/out.estimates.csv");
        CHECK(estimates.rfind("epoch,x,y,z,clock,tropo,position_error", 0) == 0);
    }

    {
        std::ofstream cmp(dir + "/cmp.json");
        cmp << R"({
          "scenario": {"n_epochs": 5, "n_satellites": 6, "rng_seed": 4,
                       "outlier": {"probability": 0.2, "bias_min": 20, "bias_max": 40}},
          "runs": [
            {"name": "l2", "estimator": {"type": "batch"}, "kernel": {"type": "l2"}},
            {"name": "huber", "estimator": {"type": "batch"}, "kernel": {"type": "huber"}}
          ]
        })";
    }
    CHECK(run_cli("compare --config " + dir + "/cmp.json --output " + dir + "/cmp") == 0);
    const std::string table = slurp(dir + "/cmp.compare.csv");
    CHECK(table.rfind("name,estimator,kernel,", 0) == 0);
    CHECK(table.find("\nl2,batch,l2,") != std::string::npos);
    CHECK(table.find("\nhuber,batch,huber,") != std::string::npos);

    SUBCASE("config errors exit nonzero") {
        std::ofstream bad(dir + "/bad.json");
        bad << R"({"scenario": {"n_epochs": 0}})";
        bad.close();
        CHECK(run_cli("run --config " + dir + "/bad.json") != 0);
        CHECK(run_cli("run --config " + dir + "/missing.json") != 0);
    }
}
