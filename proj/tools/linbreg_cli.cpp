#include <linbreg/bench.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct Overrides {
    std::optional<long long> seed;
    std::optional<std::string> out;
    std::optional<int> max_iter;
};

linbreg::ExperimentConfig load(const std::string& path, const Overrides& o) {
    linbreg::ExperimentConfig cfg = linbreg::load_config(path);
    if (o.seed) {
        if (*o.seed < 0) throw linbreg::ConfigError("--seed must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(*o.seed);
    }
    if (o.out) cfg.out = *o.out;
    if (o.max_iter) {
        if (*o.max_iter < 0) throw linbreg::ConfigError("--max-iter must be >= 0");
        cfg.max_iter = *o.max_iter;
    }
    linbreg::validate_config(cfg);
    return cfg;
}

int cmd_run(const std::string& path, const Overrides& o) {
    const linbreg::ExperimentConfig cfg = load(path, o);
    const linbreg::RunLog log = linbreg::run_experiment(cfg);
    std::printf("%s: stop=%s iterations=%d energy=%.6e time=%.2fs -> %s\n", cfg.problem.c_str(),
                log.stop_reason.c_str(), log.iterations, log.final_energy, log.wall_time, log.out_dir.c_str());
    return kExitOk;
}

int cmd_check(const std::string& path, const Overrides& o) {
    const linbreg::ExperimentConfig cfg = load(path, o);
    linbreg::build_experiment(cfg);
    std::cout << linbreg::resolved_config(cfg);
    return kExitOk;
}

int cmd_grad_check(const std::string& path, const Overrides& o, int points, double tol) {
    const linbreg::ExperimentConfig cfg = load(path, o);
    const auto reports = linbreg::grad_check_experiment(cfg, points);
    bool ok = true;
    for (std::size_t p = 0; p < reports.size(); ++p) {
        const auto& r = reports[p];
        const bool pass = r.max_rel_err <= tol;
        ok = ok && pass;
        std::printf("point %zu: max_rel_err=%.3e worst_coordinate=%zu step=%.3e %s\n", p, r.max_rel_err,
                    r.worst_coordinate, r.step, pass ? "ok" : "FAIL");
    }
    return ok ? kExitOk : kExitCheckFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linearised Bregman iteration experiments"};
    app.require_subcommand(1);
    Overrides o;
    std::string path;
    int points = 10;
    double tol = 1e-4;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", path, "experiment config file")->required();
        sub->add_option("--seed", o.seed, "override the config seed");
        sub->add_option("--out", o.out, "override the output directory");
        sub->add_option("--max-iter", o.max_iter, "override the iteration budget");
    };
    CLI::App* run = app.add_subcommand("run", "run an experiment and write its outputs");
    add_common(run);
    CLI::App* check = app.add_subcommand("check", "validate a config and print it resolved");
    add_common(check);
    CLI::App* grad = app.add_subcommand("grad-check", "finite-difference check of the configured objective");
    add_common(grad);
    grad->add_option("--points", points, "number of check points")->check(CLI::PositiveNumber);
    grad->add_option("--tol", tol, "relative error tolerance")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) return cmd_run(path, o);
        if (*check) return cmd_check(path, o);
        return cmd_grad_check(path, o, points, tol);
    } catch (const linbreg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kExitSolver;
    }
}
