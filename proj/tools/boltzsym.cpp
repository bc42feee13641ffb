#include <boltzsym/suites.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

using namespace boltzsym;

namespace {

int thread_count(int flag)
{
    if (flag > 0) return flag;
    if (const char* env = std::getenv("BOLTZSYM_THREADS")) {
        char* end = nullptr;
        long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return (int)n;
        std::cerr << "warning: ignoring BOLTZSYM_THREADS=" << env << "\n";
    }
    return (int)std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Numerical verification harness for the linearized non-cutoff Boltzmann operator"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker cap (default: BOLTZSYM_THREADS, else hardware)")
        ->check(CLI::PositiveNumber);

    std::string config, output;
    auto* run = app.add_subcommand("run", "Run the suites named in a config file");
    run->add_option("config", config, "TOML-style config")->required();
    run->add_option("--output", output, "Output directory (overrides output_dir)");

    std::string a, b;
    double rel_tol = 1e-6;
    auto* cmp = app.add_subcommand("compare", "Diff two report files or run directories");
    cmp->add_option("a", a, "Reference report or directory")->required();
    cmp->add_option("b", b, "Candidate report or directory")->required();
    cmp->add_option("--rel-tol", rel_tol, "Relative tolerance")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    set_threads(thread_count(threads));

    if (*cmp) return compare_reports(a, b, rel_tol);

    RunConfig cfg;
    try {
        cfg = load_config(config);
    } catch (const InputError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        return run_config(cfg, output.empty() ? cfg.output_dir : output);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
