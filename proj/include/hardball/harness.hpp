#pragma once

#include "hardball/checks.hpp"
#include "hardball/log_io.hpp"
#include "hardball/scenario.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace hardball
{
    namespace exit_code
    {
        inline constexpr int ok = 0;
        inline constexpr int failure = 1;
        inline constexpr int schema = 2;
        inline constexpr int simultaneity = 3;
        inline constexpr int budget = 4;
        inline constexpr int check_failed = 5;
    } // namespace exit_code

    /// A scenario plus simulation limits; the on-disk config of `simulate`.
    struct RunConfig
    {
        ScenarioSpec scenario;
        std::optional<double> horizon;
        std::size_t max_events = 1'000'000;
    };

    inline RunConfig run_config_from_json(nlohmann::json j)
    {
        if (!j.is_object())
            throw schema_error{"config must be a JSON object"};
        RunConfig c;
        if (j.contains("horizon"))
        {
            if (!j["horizon"].is_number())
                throw schema_error{"config field 'horizon' must be a number"};
            c.horizon = j["horizon"].get<double>();
            j.erase("horizon");
        }
        if (j.contains("max_events"))
        {
            if (!j["max_events"].is_number_unsigned())
                throw schema_error{"config field 'max_events' must be a nonnegative integer"};
            c.max_events = j["max_events"].get<std::size_t>();
            j.erase("max_events");
        }
        c.scenario = scenario_from_json(j);
        return c;
    }

    inline nlohmann::json read_json_file(const std::string &path)
    {
        std::ifstream is(path);
        if (!is)
            throw error{"cannot open '" + path + "'"};
        try
        {
            return nlohmann::json::parse(is);
        }
        catch (const nlohmann::json::exception &ex)
        {
            throw schema_error{"'" + path + "' is not valid JSON: " + ex.what()};
        }
    }

    /// Generates the scenario and records its complete trajectory: the run starts in the
    /// free-flight past and stops at free flight, the horizon, or the event budget.
    inline EventLog run_simulation(const RunConfig &cfg)
    {
        const SystemState s = generate(cfg.scenario);
        SimulateOptions opt;
        opt.horizon = cfg.horizon;
        opt.max_events = cfg.max_events;
        EventLog log = complete_log(s, opt);
        log.header.seed = cfg.scenario.seed;
        log.header.scenario = to_json(cfg.scenario);
        log.header.horizon = cfg.horizon;
        return log;
    }

    struct RunReport
    {
        nlohmann::json scenario;
        std::size_t n = 0;
        int d = 0;
        std::uint64_t seed = 0;
        std::size_t event_count = 0;
        std::string termination;
        std::optional<double> t0, x_t0, S1, S2;
        std::size_t depth = 0, node_count = 0, leaf_count = 0;
        std::size_t max_partners = 0;
        std::vector<CheckResult> checks;
        std::optional<std::string> error;

        bool passed() const
        {
            return !error && std::all_of(checks.begin(), checks.end(), [](const CheckResult &c) { return c.passed; });
        }

        std::vector<std::string> failed_checks() const
        {
            std::vector<std::string> f;
            for (const auto &c : checks)
                if (!c.passed)
                    f.push_back(c.name);
            return f;
        }

        const CheckResult *find(const std::string &name) const
        {
            for (const auto &c : checks)
                if (c.name == name)
                    return &c;
            return nullptr;
        }
    };

    inline nlohmann::json to_json(const RunReport &r)
    {
        nlohmann::json j;
        j["scenario"] = r.scenario;
        j["n"] = r.n;
        j["d"] = r.d;
        j["seed"] = r.seed;
        j["event_count"] = r.event_count;
        j["termination"] = r.termination;
        auto opt = [](const std::optional<double> &v) { return v ? detail::time_json(*v) : nlohmann::json(nullptr); };
        j["t0"] = opt(r.t0);
        j["x_t0"] = opt(r.x_t0);
        j["root_split"] = {{"S1", opt(r.S1)}, {"S2", opt(r.S2)}};
        j["tree"] = {{"depth", r.depth}, {"node_count", r.node_count}, {"leaf_count", r.leaf_count}};
        j["max_window_partners"] = r.max_partners;
        nlohmann::json checks = nlohmann::json::array();
        for (const auto &c : r.checks)
            checks.push_back(to_json(c));
        j["checks"] = checks;
        j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
        j["passed"] = r.passed();
        return j;
    }

    struct AnalyzeOptions
    {
        std::size_t min_gap_samples = 200;
        std::size_t alpha_samples = 64;
        bool time_reversal = true;
    };

    struct Analysis
    {
        std::optional<EventLog> normalized;
        std::optional<FrameReport> frame;
        std::optional<BranchingTree> tree;
        std::optional<CoverageReport> coverage;
        RunReport report;
    };

    /// Full pipeline on one log: raw-log checks, normalization, branching tree, coverage, and
    /// every bound comparison. Pipeline exceptions end the analysis and are reported, not thrown.
    inline Analysis analyze(const EventLog &log, const AnalyzeOptions &opt = {})
    {
        Analysis a;
        RunReport &r = a.report;
        r.scenario = log.header.scenario;
        r.n = log.size();
        r.d = log.dim();
        r.seed = log.header.seed;
        r.event_count = log.events.size();
        r.termination = to_string(log.terminated);
        try
        {
            const Trajectory traj(log);
            r.checks.push_back(check_energy(traj));
            r.checks.push_back(check_momentum(traj));
            r.checks.push_back(check_exchange_law(log));
            r.checks.push_back(check_contact(log));
            r.checks.push_back(check_min_gap(log, opt.min_gap_samples));
            r.checks.push_back(check_event_order(log));
            r.checks.push_back(check_replay(traj));
            if (opt.time_reversal)
                r.checks.push_back(check_time_reversal(log));

            auto [nlog, frame] = normalize(log, opt.alpha_samples);
            a.normalized = std::move(nlog);
            a.frame = std::move(frame);
            const EventLog &nl = *a.normalized;
            r.max_partners = unit_window_stats(nl).max_partners;
            r.checks.push_back(check_locality(nl));
            r.checks.push_back(check_window_bound(nl));
            if (!nl.both_tails_certified())
                throw uncertified_tail_error{"analysis needs a log with free-flight past and future"};
            r.t0 = a.frame->pivot->t0;
            r.x_t0 = a.frame->pivot->x_norm;

            a.tree = build_tree(nl);
            a.coverage = assign_collisions(nl, *a.tree);
            const Sextuple &root = a.tree->root();
            r.S1 = root.S1;
            r.S2 = root.S2;
            r.depth = static_cast<std::size_t>(a.tree->depth());
            r.node_count = a.tree->nodes.size();
            r.leaf_count = a.tree->leaf_count();
            for (auto &c : check_split_margins(*a.tree, *r.x_t0))
                r.checks.push_back(std::move(c));
            for (auto &c : check_tree_structure(*a.tree, *a.coverage))
                r.checks.push_back(std::move(c));
            for (auto &c : check_node_inequalities(*a.tree))
                r.checks.push_back(std::move(c));
            for (auto &c : check_collision_bounds(nl, *a.tree, *a.coverage))
                r.checks.push_back(std::move(c));
        }
        catch (const std::exception &ex)
        {
            r.error = ex.what();
        }
        return a;
    }

    inline void write_text_file(const std::filesystem::path &p, const std::string &text)
    {
        std::ofstream os(p, std::ios::binary);
        if (!os)
            throw error{"cannot open '" + p.string() + "' for writing"};
        os << text;
        if (!os)
            throw error{"write to '" + p.string() + "' failed"};
    }

    /// normalized.jsonl, frame.json, tree.json, coverage.csv and report.json under `dir`.
    inline void write_analysis(const std::filesystem::path &dir, const Analysis &a)
    {
        std::filesystem::create_directories(dir);
        if (a.normalized)
            write_text_file(dir / "normalized.jsonl", log_to_string(*a.normalized));
        if (a.frame)
            write_text_file(dir / "frame.json", to_json(*a.frame).dump(2) + "\n");
        if (a.tree)
            write_text_file(dir / "tree.json", to_json(*a.tree).dump(2) + "\n");
        if (a.coverage)
        {
            std::ostringstream os;
            write_coverage_csv(os, *a.coverage);
            write_text_file(dir / "coverage.csv", os.str());
        }
        write_text_file(dir / "report.json", to_json(a.report).dump(2) + "\n");
    }

    /// One row of the verify aggregate.
    struct VerifyRow
    {
        std::size_t index = 0;
        std::string source;
        std::string kind;
        std::size_t n = 0;
        int d = 0;
        std::uint64_t seed = 0;
        std::size_t events = 0;
        std::size_t depth = 0, nodes = 0, leaves = 0, max_partners = 0;
        std::string status; // pass | fail | error
        std::vector<std::string> failed;
        std::string message;
    };

    namespace detail
    {
        inline std::string csv_field(std::string s)
        {
            if (s.find_first_of(",\"\n") == std::string::npos)
                return s;
            std::string out = "\"";
            for (char c : s)
            {
                if (c == '"')
                    out += '"';
                out += c == '\n' ? ' ' : c;
            }
            return out + "\"";
        }

        inline std::string join(const std::vector<std::string> &v, char sep)
        {
            std::string s;
            for (std::size_t k = 0; k < v.size(); ++k)
                s += (k ? std::string(1, sep) : std::string{}) + v[k];
            return s;
        }
    } // namespace detail

    inline void write_verify_csv(std::ostream &os, const std::vector<VerifyRow> &rows)
    {
        os << "index,source,kind,n,d,seed,events,depth,nodes,leaves,max_partners,status,failed_checks,message\n";
        for (const auto &r : rows)
            os << r.index << ',' << detail::csv_field(r.source) << ',' << r.kind << ',' << r.n << ',' << r.d << ','
               << r.seed << ',' << r.events << ',' << r.depth << ',' << r.nodes << ',' << r.leaves << ','
               << r.max_partners << ',' << r.status << ',' << detail::csv_field(detail::join(r.failed, ';')) << ','
               << detail::csv_field(r.message) << '\n';
    }

    struct VerifyOptions
    {
        std::size_t jobs = 1;
        /// Per-run artifacts go to artifact_dir/run_NNNN; nothing is written when empty.
        std::filesystem::path artifact_dir;
        /// Relative log paths in the batch resolve against this directory.
        std::filesystem::path base_dir = ".";
        AnalyzeOptions analyze;
    };

    /// Accepts either an array of entries or {"runs": [...]}. Each entry is a run config or
    /// {"log": path} to analyze an existing log.
    inline std::vector<nlohmann::json> batch_entries(const nlohmann::json &batch)
    {
        const nlohmann::json *runs = &batch;
        if (batch.is_object())
        {
            for (const auto &[key, _] : batch.items())
                if (key != "runs")
                    throw schema_error{"unknown batch field '" + key + "'"};
            if (!batch.contains("runs"))
                throw schema_error{"batch object needs a 'runs' array"};
            runs = &batch.at("runs");
        }
        if (!runs->is_array())
            throw schema_error{"batch runs must be an array"};
        std::vector<nlohmann::json> out(runs->begin(), runs->end());
        for (const auto &e : out)
        {
            if (!e.is_object())
                throw schema_error{"batch entries must be objects"};
            if (e.contains("log"))
            {
                if (e.size() != 1 || !e["log"].is_string())
                    throw schema_error{"a log entry must be exactly {\"log\": path}"};
            }
            else
                run_config_from_json(e);
        }
        return out;
    }

    inline VerifyRow verify_one(std::size_t index, const nlohmann::json &entry, const VerifyOptions &opt)
    {
        VerifyRow row;
        row.index = index;
        std::filesystem::path run_dir;
        if (!opt.artifact_dir.empty())
        {
            char name[32];
            std::snprintf(name, sizeof name, "run_%04zu", index);
            run_dir = opt.artifact_dir / name;
            std::filesystem::create_directories(run_dir);
        }
        try
        {
            EventLog log;
            if (entry.contains("log"))
            {
                std::filesystem::path p = entry["log"].get<std::string>();
                row.source = p.string();
                if (p.is_relative())
                    p = opt.base_dir / p;
                log = read_log_file(p.string());
            }
            else
            {
                const RunConfig cfg = run_config_from_json(entry);
                row.source = "scenario";
                log = run_simulation(cfg);
                if (!run_dir.empty())
                    write_log_file((run_dir / "log.jsonl").string(), log);
            }
            if (log.header.scenario.is_object() && log.header.scenario.contains("kind"))
                row.kind = log.header.scenario["kind"].get<std::string>();
            row.n = log.size();
            row.d = log.dim();
            row.seed = log.header.seed;
            row.events = log.events.size();
            const Analysis a = analyze(log, opt.analyze);
            if (!run_dir.empty())
                write_analysis(run_dir, a);
            row.depth = a.report.depth;
            row.nodes = a.report.node_count;
            row.leaves = a.report.leaf_count;
            row.max_partners = a.report.max_partners;
            row.failed = a.report.failed_checks();
            if (a.report.error)
            {
                row.status = "error";
                row.message = *a.report.error;
            }
            else
                row.status = row.failed.empty() ? "pass" : "fail";
        }
        catch (const std::exception &ex)
        {
            row.status = "error";
            row.message = ex.what();
        }
        return row;
    }

    /// Runs every batch entry, `jobs` at a time. Rows come back in input order regardless of
    /// scheduling, so the aggregate is reproducible.
    inline std::vector<VerifyRow> run_verify(const std::vector<nlohmann::json> &entries, const VerifyOptions &opt)
    {
        std::vector<VerifyRow> rows(entries.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t k; (k = next.fetch_add(1)) < entries.size();)
                rows[k] = verify_one(k, entries[k], opt);
        };
        const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, entries.size()));
        std::vector<std::thread> pool;
        for (std::size_t k = 1; k < jobs; ++k)
            pool.emplace_back(worker);
        worker();
        for (auto &t : pool)
            t.join();
        return rows;
    }

} // namespace hardball
