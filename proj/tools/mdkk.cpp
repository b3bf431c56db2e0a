#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mdkk/driver.hpp"
#include "mdkk/script.hpp"

namespace
{

int run_script(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw mdkk::Error("cannot open script '" + path + "'");
    }
    std::stringstream text;
    text << in.rdbuf();
    const mdkk::Script script = mdkk::parse_script(text.str());
    mdkk::Simulation sim(&std::cout);
    const auto dir = std::filesystem::path(path).parent_path();
    sim.execute(script, dir.empty() ? std::string(".") : dir.string());
    return 0;
}

int run_bench(const std::string& potential, const std::string& sizes, std::size_t reps, const std::string& out)
{
    const auto options = mdkk::default_bench_options(potential);
    const auto rows = mdkk::bench_saturation(potential, mdkk::parse_sizes(sizes), reps, options, &std::cerr);
    if (out.empty()) {
        mdkk::write_bench_csv(rows, std::cout);
    } else {
        mdkk::write_bench_csv(rows, out);
    }
    const auto report = mdkk::analyze_saturation(rows);
    std::fprintf(stderr, "max %.4e atom-steps/s, 90%% of max first at N = %zu, worst drop %.1f%%\n",
                 report.max_throughput, report.n90, 100.0 * report.worst_drop);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mdkk: a small molecular dynamics engine"};
    app.require_subcommand(1);

    std::string script;
    auto* run = app.add_subcommand("run", "Execute an input script");
    run->add_option("script", script, "Input script")->required();

    std::string potential;
    std::string sizes;
    std::size_t reps = 3;
    std::string out;
    auto* bench = app.add_subcommand("bench", "Throughput versus system size");
    bench->add_option("potential", potential, "lj or snap")->required();
    bench->add_option("--sizes", sizes, "Ascending comma-separated atom counts")->required();
    bench->add_option("--reps", reps, "Repetitions per size (best is kept)")->check(CLI::PositiveNumber);
    bench->add_option("--out", out, "CSV output file (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return run_script(script);
        }
        return run_bench(potential, sizes, reps, out);
    } catch (const std::exception& e) {
        std::cerr << "mdkk: error: " << e.what() << "\n";
        return 1;
    }
}
