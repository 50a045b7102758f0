// Command-line harness: generate synthetic scenarios, run one estimator
// configuration, or compare several configurations on a shared scenario.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gnssfg/gnssfg.hpp"

namespace {

gnssfg::Json load_json(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw gnssfg::ConfigError("cannot open config file " + path);
    try {
        return gnssfg::Json::parse(file);
    } catch (const std::exception& err) {
        throw gnssfg::ConfigError(std::string("failed to parse ") + path + ": " + err.what());
    }
}

int run_generate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 std::string output) {
    const gnssfg::Json j = load_json(config_path);
    gnssfg::cfg_detail::check_keys(j, "generate", {"scenario", "output"});
    if (!j.contains("scenario"))
        throw gnssfg::ConfigError("generate config needs a 'scenario' object");
    gnssfg::ScenarioConfig cfg = gnssfg::parse_scenario(j.at("scenario"), "scenario");
    if (seed) cfg.rng_seed = *seed;
    if (output.empty()) output = gnssfg::cfg_detail::get_str(j, "generate", "output", "scenario");
    const gnssfg::Scenario scenario = gnssfg::generate(cfg);
    gnssfg::write_scenario(scenario, output);
    std::cout << "wrote " << output << ".obs.csv and " << output << ".truth.csv ("
              << scenario.n_epochs() << " epochs)\n";
    return 0;
}

int run_single(const std::string& config_path, std::optional<std::uint64_t> seed,
               const std::string& output) {
    const gnssfg::Json j = load_json(config_path);
    gnssfg::RunConfig config = gnssfg::parse_run_config(j);
    if (seed) {
        if (!config.scenario)
            throw gnssfg::ConfigError("--seed applies only to inline scenarios");
        config.scenario->rng_seed = *seed;
    }
    if (!output.empty()) config.output_path = output;

    const gnssfg::Scenario scenario =
        gnssfg::resolve_scenario(config.scenario, config.scenario_path);
    const gnssfg::RunOutput result = gnssfg::execute_run(scenario, config);
    for (const auto& warning : result.warnings) std::cerr << "warning: " << warning << "\n";

    if (!config.output_path.empty()) {
        gnssfg::write_run_outputs(result, scenario, config.output_path);
        std::cout << "wrote " << config.output_path << ".metrics.json and "
                  << config.output_path << ".estimates.csv\n";
    }
    std::cout << gnssfg::metrics_to_json(result).dump(2) << "\n";
    return 0;
}

int run_compare(const std::string& config_path, std::optional<std::uint64_t> seed,
                const std::string& output) {
    const gnssfg::Json j = load_json(config_path);
    gnssfg::CompareConfig config = gnssfg::parse_compare_config(j);
    if (seed) {
        if (!config.scenario)
            throw gnssfg::ConfigError("--seed applies only to inline scenarios");
        config.scenario->rng_seed = *seed;
    }
    if (!output.empty()) config.output_path = output;

    const std::vector<gnssfg::RunOutput> rows = gnssfg::execute_compare(config);
    for (const auto& row : rows)
        for (const auto& warning : row.warnings)
            std::cerr << "warning: [" << row.name << "] " << warning << "\n";
    const std::string table = gnssfg::compare_table(rows);
    std::cout << table;
    if (!config.output_path.empty()) {
        std::ofstream file(config.output_path + ".compare.csv");
        if (!file)
            throw gnssfg::ConfigError("cannot open " + config.output_path + ".compare.csv");
        file << table;
        std::cout << "wrote " << config.output_path << ".compare.csv\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GNSS factor-graph estimation toolbox"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output;
    std::uint64_t seed_value = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON configuration file")->required();
        cmd->add_option("--seed", seed_value, "override the scenario rng seed")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--output", output, "output path prefix");
    };

    CLI::App* generate = app.add_subcommand("generate", "write scenario files from a config");
    add_common(generate);
    CLI::App* run = app.add_subcommand("run", "run one estimator configuration");
    add_common(run);
    CLI::App* compare = app.add_subcommand("compare", "run several configurations on one scenario");
    add_common(compare);

    CLI11_PARSE(app, argc, argv);
    const std::optional<std::uint64_t> seed =
        seed_set ? std::optional<std::uint64_t>(seed_value) : std::nullopt;

    try {
        if (app.got_subcommand(generate)) return run_generate(config_path, seed, output);
        if (app.got_subcommand(run)) return run_single(config_path, seed, output);
        if (app.got_subcommand(compare)) return run_compare(config_path, seed, output);
    } catch (const gnssfg::ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    } catch (const gnssfg::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 1;
}
