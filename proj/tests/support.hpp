#pragma once

#include "hardball/hardball.hpp"

#include <initializer_list>
#include <vector>

namespace hardball::testing
{
    /// State from literal rows; all rows must have the same length.
    inline SystemState make_state(std::initializer_list<std::vector<double>> x, std::initializer_list<std::vector<double>> v,
                                  double t = 0.0)
    {
        const int d = static_cast<int>(x.begin()->size());
        SystemState s(d, x.size(), t);
        std::size_t k = 0;
        for (const auto &row : x)
        {
            std::copy(row.begin(), row.end(), s.position(k).begin());
            ++k;
        }
        k = 0;
        for (const auto &row : v)
        {
            std::copy(row.begin(), row.end(), s.velocity(k).begin());
            ++k;
        }
        return s;
    }

    inline ScenarioSpec spec(ScenarioKind kind, std::size_t n, int d, std::uint64_t seed)
    {
        ScenarioSpec s;
        s.kind = kind;
        s.n = n;
        s.d = d;
        s.seed = seed;
        return s;
    }

    inline EventLog complete_run(const ScenarioSpec &s)
    {
        RunConfig cfg;
        cfg.scenario = s;
        return run_simulation(cfg);
    }

    inline constexpr ScenarioKind all_kinds[] = {ScenarioKind::random_box, ScenarioKind::converging_cluster,
                                                  ScenarioKind::two_cluster, ScenarioKind::line_chain};
} // namespace hardball::testing
