// hardball: simulate, analyze, verify and tabulate bounds for equal hard balls in free space.

#include "hardball/hardball.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace hardball;

namespace
{
    fs::path default_out_dir()
    {
        if (const char *env = std::getenv("HARDBALL_OUT_DIR"); env && *env)
            return env;
        return ".";
    }

    int cmd_simulate(const std::string &config, std::string out, std::optional<std::uint64_t> seed,
                     std::optional<std::size_t> max_events, std::optional<double> horizon)
    {
        RunConfig cfg = run_config_from_json(read_json_file(config));
        if (seed)
            cfg.scenario.seed = *seed;
        if (max_events)
            cfg.max_events = *max_events;
        if (horizon)
            cfg.horizon = *horizon;
        const EventLog log = run_simulation(cfg);
        if (out.empty())
            out = (default_out_dir() / "log.jsonl").string();
        if (auto parent = fs::path(out).parent_path(); !parent.empty())
            fs::create_directories(parent);
        write_log_file(out, log);
        std::cerr << "simulate: " << log.events.size() << " events, terminated " << to_string(log.terminated) << "\n";
        return log.terminated == Termination::budget ? exit_code::budget : exit_code::ok;
    }

    int cmd_analyze(const std::string &log_path, std::string out)
    {
        const EventLog log = read_log_file(log_path);
        const Analysis a = analyze(log);
        if (out.empty())
            out = (default_out_dir() / "analysis").string();
        write_analysis(out, a);
        const RunReport &r = a.report;
        std::cerr << "analyze: " << r.event_count << " events, " << r.node_count << " nodes, depth " << r.depth;
        if (r.error)
            std::cerr << ", error: " << *r.error;
        for (const auto &f : r.failed_checks())
            std::cerr << ", failed " << f;
        std::cerr << "\n";
        return r.passed() ? exit_code::ok : exit_code::check_failed;
    }

    int cmd_verify(const std::string &config, std::string out, std::size_t jobs)
    {
        const auto entries = batch_entries(read_json_file(config));
        if (out.empty())
            out = (default_out_dir() / "verify.csv").string();
        const fs::path out_path(out);
        VerifyOptions opt;
        opt.jobs = jobs;
        opt.base_dir = fs::path(config).parent_path();
        if (opt.base_dir.empty())
            opt.base_dir = ".";
        opt.artifact_dir = (out_path.parent_path().empty() ? fs::path(".") : out_path.parent_path()) /
                           (out_path.stem().string() + "_runs");
        const auto rows = run_verify(entries, opt);
        std::ostringstream os;
        write_verify_csv(os, rows);
        write_text_file(out_path, os.str());
        std::size_t bad = 0;
        for (const auto &r : rows)
            bad += r.status != "pass";
        std::cerr << "verify: " << rows.size() << " runs, " << bad << " not passing\n";
        return bad == 0 ? exit_code::ok : exit_code::check_failed;
    }

    std::string fmt(double x)
    {
        std::ostringstream os;
        os << std::setprecision(17) << x;
        return os.str();
    }

    int cmd_bounds(long long n_min, long long n_max, int d, double mass_ratio, double radius_ratio, std::string out,
                   std::string compare_out)
    {
        if (n_min < 1 || n_max < n_min)
            throw parameter_error{"bounds: need 1 <= n-min <= n-max"};
        std::ostringstream os;
        os << "formula_id,n,d,params,ln_value,log10_value\n";
        const std::string ratios = "mass_ratio=" + fmt(mass_ratio) + ";radius_ratio=" + fmt(radius_ratio);
        for (long long n = n_min; n <= n_max; ++n)
            for (auto f : {FormulaId::main_thm, FormulaId::bfk1, FormulaId::bfk5, FormulaId::lower, FormulaId::window,
                           FormulaId::interval, FormulaId::tree_size, FormulaId::per_leaf,
                           FormulaId::open_interval_total})
            {
                LogBound b;
                b.formula = f;
                b.n = n;
                b.d = d;
                b.mass_ratio = mass_ratio;
                b.radius_ratio = radius_ratio;
                b.n_family = n;
                b.x_norm = 1.0;
                b = evaluate(b);
                std::string params = "-";
                if (f == FormulaId::bfk1)
                    params = ratios;
                else if (f == FormulaId::bfk5)
                    params = "mass_ratio=" + fmt(mass_ratio);
                else if (f == FormulaId::interval)
                    params = "n_F=" + std::to_string(n) + ";x_norm=1";
                os << to_string(f) << ',' << n << ',' << d << ',' << params << ',' << fmt(b.ln_value) << ','
                   << fmt(b.log10_value()) << '\n';
            }
        if (out.empty())
            std::cout << os.str();
        else
            write_text_file(out, os.str());

        if (!compare_out.empty())
        {
            const auto c = compare_bounds(log_sweep(std::max(2LL, n_min), std::max(n_max, 2LL)), d);
            std::ostringstream cs;
            cs << "n,d,ln_lower,ln_main,ln_bfk1,main_over_nlogn,bfk1_over_n2logn\n";
            for (const auto &r : c.rows)
            {
                const double nl = static_cast<double>(r.n) * std::log(static_cast<double>(r.n));
                cs << r.n << ',' << d << ',' << fmt(r.ln_lower) << ',' << fmt(r.ln_main) << ',' << fmt(r.ln_bfk1) << ','
                   << fmt(r.ln_main / nl) << ',' << fmt(r.ln_bfk1 / (nl * static_cast<double>(r.n))) << '\n';
            }
            // Summary lines are CSV comments so the table stays machine-readable.
            cs << "# crossover_n=" << (c.crossover ? std::to_string(*c.crossover) : std::string{"none"})
               << " c2=" << fmt(c.c2) << " c3_lower=" << fmt(c.c3_lower) << '\n';
            write_text_file(compare_out, cs.str());
        }
        return exit_code::ok;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Event-driven hard-ball collisions with branching-family analysis"};
    app.require_subcommand(1);

    std::string config, out, log_path, compare_out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_events;
    std::optional<double> horizon;
    std::size_t jobs = 1;
    long long n_min = 1, n_max = 10;
    int d = 3;
    double mass_ratio = 1.0, radius_ratio = 1.0;

    auto *sim = app.add_subcommand("simulate", "Generate a scenario and write its JSONL event log");
    sim->add_option("--config", config, "Scenario config (JSON)")->required();
    sim->add_option("--out", out, "Output log path");
    sim->add_option("--seed-override", seed, "Replace the config seed");
    sim->add_option("--max-events", max_events, "Event budget");
    sim->add_option("--horizon", horizon, "Stop before the first collision after this time");

    auto *ana = app.add_subcommand("analyze", "Normalize a log, build its branching tree and run all checks");
    ana->add_option("log", log_path, "Input JSONL log")->required();
    ana->add_option("--out", out, "Output directory");

    auto *ver = app.add_subcommand("verify", "Run a batch of scenarios or logs and aggregate checks into CSV");
    ver->add_option("--config", config, "Batch config (JSON)")->required();
    ver->add_option("--out", out, "Aggregate CSV path");
    ver->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

    auto *bnd = app.add_subcommand("bounds", "Tabulate the closed-form bounds in log space");
    bnd->add_option("--n-min", n_min, "Smallest n");
    bnd->add_option("--n-max", n_max, "Largest n");
    bnd->add_option("--d", d, "Dimension");
    bnd->add_option("--mass-ratio", mass_ratio, "m_max / m_min for the general-mass formulas");
    bnd->add_option("--radius-ratio", radius_ratio, "r_max / r_min for the general-radius formula");
    bnd->add_option("--out", out, "CSV path (stdout when omitted)");
    bnd->add_option("--compare-out", compare_out, "Also write the ordering table to this CSV");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? exit_code::ok : exit_code::schema;
    }

    try
    {
        if (*sim)
            return cmd_simulate(config, out, seed, max_events, horizon);
        if (*ana)
            return cmd_analyze(log_path, out);
        if (*ver)
            return cmd_verify(config, out, jobs);
        if (*bnd)
            return cmd_bounds(n_min, n_max, d, mass_ratio, radius_ratio, out, compare_out);
    }
    catch (const schema_error &e)
    {
        std::cerr << "schema error: " << e.what() << "\n";
        return exit_code::schema;
    }
    catch (const parameter_error &e)
    {
        std::cerr << "parameter error: " << e.what() << "\n";
        return exit_code::schema;
    }
    catch (const simultaneity_error &e)
    {
        std::cerr << "simultaneity: " << e.what() << "\n";
        return exit_code::simultaneity;
    }
    catch (const budget_error &e)
    {
        std::cerr << "budget: " << e.what() << "\n";
        return exit_code::budget;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code::failure;
    }
    return exit_code::failure;
}
