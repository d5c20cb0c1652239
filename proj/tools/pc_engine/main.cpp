#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "pcn/errors.hpp"
#include "pcn/matrix.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitVerifyFail = 3;

void apply_thread_env() {
    if (const char* env = std::getenv("PC_ENGINE_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) pcn::set_max_threads(static_cast<unsigned>(n));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pc-engine: predictive coding relaxation, analysis, and "
                 "training experiments"};
    app.require_subcommand(1);

    std::string config_path;
    pce::Overrides overrides;
    std::uint64_t seed_flag = 0;
    std::string precision_flag, out_flag;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON experiment config")
            ->required();
        sub->add_option("--seed", seed_flag, "override config seed");
        sub->add_option("--precision", precision_flag,
                        "override precision (f32|f64)");
        sub->add_option("--out", out_flag, "override output directory");
    };

    CLI::App* relax = app.add_subcommand(
        "relax", "relaxation dynamics against the analytic equilibrium");
    CLI::App* decay = app.add_subcommand(
        "decay", "wavefront traces and binomial/Poisson decay tables");
    CLI::App* verify =
        app.add_subcommand("verify", "sPC/ePC equivalence check suite");
    CLI::App* train = app.add_subcommand("train", "train a model");
    CLI::App* gradtraj = app.add_subcommand(
        "gradtraj", "weight-gradient trajectories during relaxation");
    for (CLI::App* sub : {relax, decay, verify, train, gradtraj})
        add_common(sub);

    CLI11_PARSE(app, argc, argv);
    apply_thread_env();

    const std::string command = app.get_subcommands().front()->get_name();

    try {
        pce::ExperimentConfig cfg = pce::load_config(config_path, command);
        if (seed_flag != 0 || app.get_subcommands().front()->count("--seed"))
            overrides.seed = seed_flag;
        if (!precision_flag.empty()) overrides.precision = precision_flag;
        if (!out_flag.empty()) overrides.out_dir = out_flag;
        pce::apply_overrides(cfg, overrides);

        if (command == "relax") return pce::cmd_relax(cfg);
        if (command == "decay") return pce::cmd_decay(cfg);
        if (command == "verify") return pce::cmd_verify(cfg);
        if (command == "train") return pce::cmd_train(cfg);
        if (command == "gradtraj") return pce::cmd_gradtraj(cfg);
        std::fprintf(stderr, "unknown command %s\n", command.c_str());
        return kExitConfig;
    } catch (const pcn::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const pcn::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitConfig;
    } catch (const pcn::DivergenceError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const pcn::Error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
    return kExitVerifyFail;  // unreachable
}
