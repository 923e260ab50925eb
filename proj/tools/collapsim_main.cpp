// Command-line front end. Everything that can be rejected is rejected
// before the output directory exists: flag syntax, config syntax, and the
// full scenario validation. After that the scenario runs in memory and the
// files land in one pass, so a populated directory is always a complete
// run. Exit codes: 0 clean run, 1 a run-level audit failed, 2 the
// invocation or config was unusable.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "collapsim/io.hpp"
#include "collapsim/scenario.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"interaction-driven collapse scenario runner"};
    app.get_formatter()->column_width(30);

    std::string config_path;
    std::string out_dir = "out";
    std::string emit_text;
    std::uint64_t seed = 0;
    int workers = 0;

    app.add_option("--config", config_path, "scenario config file")->required();
    CLI::Option* seed_opt =
        app.add_option("--seed", seed, "run seed (overrides config and environment)");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    CLI::Option* workers_opt =
        app.add_option("--workers", workers, "trajectory worker threads");
    CLI::Option* emit_opt = app.add_option(
        "--emit", emit_text, "comma list of traces,gamma,audits, or none");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    collapsim::ScenarioConfig cfg;
    try {
        cfg = collapsim::parse_config(collapsim::read_text_file(config_path));

        if (seed_opt->count() > 0) {
            cfg.run.seed = seed;
        } else if (!cfg.seed_from_file) {
            if (const char* env = std::getenv("COLLAPSIM_SEED")) {
                std::size_t used = 0;
                cfg.run.seed = std::stoull(env, &used);
                if (used != std::string(env).size())
                    throw std::invalid_argument("COLLAPSIM_SEED is not an integer");
            }
        }
        if (workers_opt->count() > 0) cfg.run.workers = workers;
        if (emit_opt->count() > 0)
            cfg.run.emit = collapsim::emit_flags_from_text(emit_text);

        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        collapsim::ScenarioOutputs out = collapsim::execute_scenario(cfg);

        fs::create_directories(out_dir);
        for (const auto& [name, content] : out.files)
            collapsim::write_text_file((fs::path(out_dir) / name).string(), content);
        collapsim::write_text_file((fs::path(out_dir) / "manifest.txt").string(),
                                   collapsim::manifest_text(cfg, out.notes));

        for (const std::string& note : out.notes) std::cerr << "note: " << note << '\n';
        if (out.any_audit) {
            std::cerr << "audits: " << (out.audits_pass ? "pass" : "FAIL") << '\n';
            if (!out.audits_pass) return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return 1;
    }
}
