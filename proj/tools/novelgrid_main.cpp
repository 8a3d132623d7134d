#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "novelgrid/config.hpp"
#include "novelgrid/errors.hpp"
#include "novelgrid/gridworld.hpp"
#include "novelgrid/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitContract = 4;
constexpr int kExitCalibration = 5;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string seed;
    std::string methods;
    std::string envs;
    int snapshots = -1;
};

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

novelgrid::RunConfig resolve_config(const CommonOpts& opts) {
    novelgrid::RunConfig config =
        opts.config_path.empty() ? novelgrid::default_config() : novelgrid::load_config(opts.config_path);
    if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
    if (!opts.seed.empty()) config.root_seed = std::stoull(opts.seed);
    if (!opts.methods.empty()) config.methods = split_list(opts.methods);
    if (!opts.envs.empty()) config.envs = split_list(opts.envs);
    if (opts.snapshots >= 0) config.snapshots = opts.snapshots;
    // Round-trip through the validator so flag overrides get the same checks.
    return novelgrid::config_from_json(novelgrid::config_to_json(config));
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON run configuration");
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "root seed (overrides config)");
    cmd->add_option("--methods", opts.methods, "comma-separated detector list (overrides config)");
    cmd->add_option("--envs", opts.envs, "comma-separated environment ids (overrides config)");
    cmd->add_option("--snapshots", opts.snapshots, "training snapshot count (overrides config)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridworld novelty-detection testbed"};
    app.require_subcommand(1);

    CommonOpts opts;
    CLI::App* collect = app.add_subcommand("collect", "gather nominal experience buffers");
    CLI::App* train = app.add_subcommand("train", "fit the world model from collected buffers");
    CLI::App* evaluate = app.add_subcommand("evaluate", "run detectors across environments and report");
    CLI::App* report = app.add_subcommand("report", "recompute the report from saved traces");
    for (CLI::App* cmd : {collect, train, evaluate, report}) add_common(cmd, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        const novelgrid::RunConfig config = resolve_config(opts);
        if (collect->parsed()) novelgrid::pipeline::cmd_collect(config);
        if (train->parsed()) novelgrid::pipeline::cmd_train(config);
        if (evaluate->parsed()) novelgrid::pipeline::cmd_evaluate(config);
        if (report->parsed()) novelgrid::pipeline::cmd_report(config);
    } catch (const novelgrid::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const novelgrid::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const novelgrid::CalibrationError& e) {
        std::cerr << "calibration error: " << e.what() << "\n";
        return kExitCalibration;
    } catch (const std::invalid_argument& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return kExitContract;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitContract;
    }
    return kExitOk;
}
