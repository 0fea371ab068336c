#pragma once

#include "hardball/bounds.hpp"
#include "hardball/tree.hpp"

#include <json.hpp>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace hardball
{
    /// One verification outcome. `observed` is compared against `limit` with `relation`.
    struct CheckResult
    {
        std::string name;
        bool passed = false;
        double observed = 0.0;
        double limit = 0.0;
        std::string relation = "<=";
        std::string detail;
    };

    inline nlohmann::json to_json(const CheckResult &c)
    {
        nlohmann::json j{{"name", c.name}, {"passed", c.passed}, {"relation", c.relation}};
        // Non-finite values have no JSON number form.
        j["observed"] = std::isfinite(c.observed) ? nlohmann::json(c.observed) : nlohmann::json(std::to_string(c.observed));
        j["limit"] = std::isfinite(c.limit) ? nlohmann::json(c.limit) : nlohmann::json(std::to_string(c.limit));
        if (!c.detail.empty())
            j["detail"] = c.detail;
        return j;
    }

    namespace detail
    {
        inline CheckResult at_most(std::string name, double observed, double limit, std::string detail = {})
        {
            return {std::move(name), observed <= limit, observed, limit, "<=", std::move(detail)};
        }
        inline CheckResult at_least(std::string name, double observed, double limit, std::string detail = {})
        {
            return {std::move(name), observed >= limit, observed, limit, ">=", std::move(detail)};
        }
        inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
        {
            double m = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k)
                m = std::max(m, std::abs(a[k] - b[k]));
            return m;
        }
    } // namespace detail

    /// Largest relative energy drift and momentum drift (relative to sqrt(n E0)) over all
    /// post-event states.
    inline std::pair<double, double> conservation_drift(const Trajectory &traj)
    {
        const SystemState &s0 = traj.snapshot(0);
        const double e0 = s0.energy();
        const auto p0 = s0.momentum();
        const double p_scale = std::sqrt(static_cast<double>(s0.size()) * e0);
        double de = 0.0, dp = 0.0;
        for (std::size_t k = 1; k <= traj.event_count(); ++k)
        {
            const SystemState &s = traj.snapshot(k);
            de = std::max(de, std::abs(s.energy() - e0) / e0);
            dp = std::max(dp, detail::max_abs_diff(s.momentum(), p0) / p_scale);
        }
        return {de, dp};
    }

    inline CheckResult check_energy(const Trajectory &traj, double tol = 1e-9)
    {
        return detail::at_most("energy_drift", conservation_drift(traj).first, tol);
    }

    inline CheckResult check_momentum(const Trajectory &traj, double tol = 1e-9)
    {
        return detail::at_most("momentum_drift", conservation_drift(traj).second, tol);
    }

    /// Largest deviation from the equal-mass exchange rule over all recorded events: normal
    /// components swapped, tangential components untouched.
    inline double exchange_law_error(const EventLog &log)
    {
        double worst = 0.0;
        const int d = log.dim();
        for (const auto &e : log.events)
        {
            auto w = sub(e.xi, e.xj);
            const double len = norm(w);
            if (!(len > 0.0))
                return infinity;
            for (auto &c : w)
                c /= len;
            const double ni_pre = dot(e.vi_pre, w), nj_pre = dot(e.vj_pre, w);
            const double ni_post = dot(e.vi_post, w), nj_post = dot(e.vj_post, w);
            worst = std::max({worst, std::abs(ni_post - nj_pre), std::abs(nj_post - ni_pre)});
            for (int k = 0; k < d; ++k)
            {
                const double ti_pre = e.vi_pre[k] - ni_pre * w[k], ti_post = e.vi_post[k] - ni_post * w[k];
                const double tj_pre = e.vj_pre[k] - nj_pre * w[k], tj_post = e.vj_post[k] - nj_post * w[k];
                worst = std::max({worst, std::abs(ti_post - ti_pre), std::abs(tj_post - tj_pre)});
            }
        }
        return worst;
    }

    inline CheckResult check_exchange_law(const EventLog &log, double tol = 1e-12)
    {
        return detail::at_most("exchange_law", exchange_law_error(log), tol);
    }

    inline CheckResult check_min_gap(const EventLog &log, std::size_t samples = 200)
    {
        return detail::at_least("min_gap", min_gap(log, samples), contact_distance - tol::geom);
    }

    inline CheckResult check_contact(const EventLog &log)
    {
        double worst = 0.0;
        for (const auto &e : log.events)
            worst = std::max(worst, std::abs(distance(e.xi, e.xj) - contact_distance));
        return detail::at_most("contact_distance", worst, tol::geom);
    }

    /// Smallest gap between consecutive event times; must exceed the simultaneity tolerance.
    inline CheckResult check_event_order(const EventLog &log)
    {
        double smallest = infinity;
        for (std::size_t k = 1; k < log.events.size(); ++k)
            smallest = std::min(smallest, log.events[k].t - log.events[k - 1].t);
        CheckResult c = detail::at_least("event_order", smallest, tol::time);
        c.passed = smallest > tol::time;
        c.relation = ">";
        return c;
    }

    /// Re-derives every event from the replayed state with the exhaustive scheduler: same pair,
    /// same time, same positions and pre-collision velocities, no missed collision in between
    /// or after the last event.
    inline CheckResult check_replay(const Trajectory &traj)
    {
        const EventLog &log = traj.log();
        double worst = 0.0;
        std::string problem;
        try
        {
            for (std::size_t k = 0; k <= traj.event_count() && problem.empty(); ++k)
            {
                const auto next = next_event(traj.snapshot(k));
                if (k == traj.event_count())
                {
                    if (next && (log.terminated == Termination::free_flight ||
                                 (log.header.horizon && next->t <= *log.header.horizon)))
                        problem = "collision after the last recorded event";
                    break;
                }
                const auto &e = log.events[k];
                if (!next || next->i != e.i || next->j != e.j)
                {
                    problem = "event " + std::to_string(k) + " is not the next collision of the replayed state";
                    break;
                }
                worst = std::max(worst, std::abs(next->t - e.t) / std::max(1.0, std::abs(e.t)));
                SystemState s = traj.snapshot(k);
                s.advance(e.t - s.t);
                const double pos_scale = std::max(1.0, norm(e.xi));
                worst = std::max(worst, detail::max_abs_diff(s.position(e.i), e.xi) / pos_scale);
                worst = std::max(worst, detail::max_abs_diff(s.position(e.j), e.xj) / pos_scale);
                worst = std::max(worst, detail::max_abs_diff(s.velocity(e.i), e.vi_pre));
                worst = std::max(worst, detail::max_abs_diff(s.velocity(e.j), e.vj_pre));
            }
            if (problem.empty() && log.past_free_flight && next_event(reversed(log.initial)))
                problem = "log claims a free-flight past but the initial state has a backward collision";
        }
        catch (const error &ex)
        {
            problem = ex.what();
        }
        CheckResult c = detail::at_most("replay_consistency", worst, tol::time, problem);
        if (!problem.empty())
        {
            c.passed = false;
            c.observed = infinity;
        }
        return c;
    }

    /// Result of running the final state backward: the largest event-time mismatch, or +inf
    /// when counts or the pair sequence differ.
    inline double time_reversal_error(const EventLog &log)
    {
        const Trajectory traj(log);
        const double t_end = traj.last_time() + 1.0;
        SimulateOptions opt;
        opt.max_events = log.events.size() + 16;
        const EventLog back = simulate(reversed(traj.state_at(t_end)), opt);
        const std::size_t m = log.events.size();
        if (back.events.size() != m)
            return infinity;
        double worst = 0.0;
        for (std::size_t k = 0; k < m; ++k)
        {
            const auto &f = log.events[m - 1 - k];
            const auto &b = back.events[k];
            if (f.i != b.i || f.j != b.j)
                return infinity;
            worst = std::max(worst, std::abs(-b.t - f.t) / std::max(1.0, std::abs(f.t)));
        }
        return worst;
    }

    inline CheckResult check_time_reversal(const EventLog &log, double tol = 1e-8)
    {
        double err = infinity;
        std::string detail;
        try
        {
            err = time_reversal_error(log);
        }
        catch (const error &ex)
        {
            detail = ex.what();
        }
        return detail::at_most("time_reversal", err, tol, detail);
    }

    struct WindowStats
    {
        std::size_t max_partners = 0; // distinct partners of one ball in a unit window
        std::size_t max_events = 0;   // collisions in a unit window
    };

    /// Maxima over all windows [u, u+1]. Both counts are maximized by windows starting at an
    /// event time, so only those are scanned.
    inline WindowStats unit_window_stats(const EventLog &log)
    {
        WindowStats w;
        const auto &ev = log.events;
        const std::size_t m = ev.size();
        for (std::size_t a = 0, b = 0; a < m; ++a)
        {
            while (b < m && ev[b].t <= ev[a].t + 1.0)
                ++b;
            w.max_events = std::max(w.max_events, b - a);
        }
        std::vector<std::vector<std::size_t>> by_ball(log.size());
        for (std::size_t k = 0; k < m; ++k)
        {
            by_ball[ev[k].i].push_back(k);
            by_ball[ev[k].j].push_back(k);
        }
        for (std::size_t ball = 0; ball < log.size(); ++ball)
        {
            const auto &idx = by_ball[ball];
            for (std::size_t a = 0; a < idx.size(); ++a)
            {
                std::set<std::size_t> partners;
                for (std::size_t b = a; b < idx.size() && ev[idx[b]].t <= ev[idx[a]].t + 1.0; ++b)
                {
                    const auto &e = ev[idx[b]];
                    partners.insert(e.i == ball ? e.j : e.i);
                }
                w.max_partners = std::max(w.max_partners, partners.size());
            }
        }
        return w;
    }

    inline CheckResult check_locality(const EventLog &normalized)
    {
        const auto w = unit_window_stats(normalized);
        return detail::at_most("window_partners", static_cast<double>(w.max_partners), std::pow(5.0, normalized.dim()));
    }

    inline CheckResult check_window_bound(const EventLog &normalized)
    {
        const auto w = unit_window_stats(normalized);
        const double ln_obs = w.max_events > 0 ? std::log(static_cast<double>(w.max_events)) : -infinity;
        return detail::at_most("window_bound_ln", ln_obs,
                               ln_window_bound(static_cast<long long>(normalized.size()), normalized.dim()));
    }

    /// Ratios of the root split distances to their allowances; each must be at most 1.
    struct SplitMargins
    {
        double after = 0.0;  // (S2 - t0) / (100 n^3 |x(t0)|)
        double before = 0.0; // (t0 - S1) / (100 n^3 |x(t0)|)
        double total = 0.0;  // (S2 - S1) / (200 n^3 |x(t0)|)
    };

    inline SplitMargins split_margins(std::size_t n, double t0, double x_t0, double S1, double S2)
    {
        const double n3 = std::pow(static_cast<double>(n), 3);
        return {(S2 - t0) / (100.0 * n3 * x_t0), (t0 - S1) / (100.0 * n3 * x_t0), (S2 - S1) / (200.0 * n3 * x_t0)};
    }

    inline std::vector<CheckResult> check_split_margins(const BranchingTree &tree, double x_t0)
    {
        const Sextuple &root = tree.root();
        std::vector<CheckResult> out;
        if (root.degenerate || root.size() < 2)
            return out;
        const auto m = split_margins(tree.n, root.T0, x_t0, root.S1, root.S2);
        out.push_back(detail::at_most("split_after_margin", m.after, 1.0));
        out.push_back(detail::at_most("split_before_margin", m.before, 1.0));
        out.push_back(detail::at_most("split_total_margin", m.total, 1.0));
        return out;
    }

    inline std::vector<CheckResult> check_tree_structure(const BranchingTree &tree, const CoverageReport &cov)
    {
        std::vector<CheckResult> out;
        out.push_back(detail::at_most("tree_depth", tree.depth(), static_cast<double>(tree.n)));

        double worst_offspring = -infinity;
        std::string where;
        for (const auto &s : tree.nodes)
        {
            if (s.offspring.empty())
                continue;
            const double r = std::log(static_cast<double>(s.offspring.size())) -
                             ln_offspring_bound(static_cast<long long>(s.size()));
            if (r > worst_offspring)
            {
                worst_offspring = r;
                where = "node " + std::to_string(s.id) + " has " + std::to_string(s.offspring.size()) + " offspring";
            }
        }
        if (std::isfinite(worst_offspring))
            out.push_back(detail::at_most("offspring_bound_ln_excess", worst_offspring, 0.0, where));
        else
            out.push_back(detail::at_most("offspring_bound_ln_excess", 0.0, 0.0, "no internal nodes"));

        out.push_back(detail::at_most("tree_size_ln", std::log(static_cast<double>(tree.nodes.size())),
                                      ln_tree_size_bound(static_cast<long long>(tree.n))));

        double worst_leaf = 0.0;
        std::string leaf_where;
        for (const auto &s : tree.nodes)
            if (s.is_leaf && s.size() >= 3)
            {
                const double ratio = s.r / (4.0 * static_cast<double>(s.size()));
                if (ratio > worst_leaf)
                {
                    worst_leaf = ratio;
                    leaf_where = "leaf " + std::to_string(s.id) + " n_F=" + std::to_string(s.size());
                }
            }
        out.push_back(detail::at_most("leaf_radius_ratio", worst_leaf, 1.0, leaf_where));

        out.push_back(detail::at_most("chain_isolation_violations", static_cast<double>(tree.chain_violations.size()), 0.0));

        CheckResult c = detail::at_most("coverage_failures", static_cast<double>(cov.uncovered + cov.multiple), 0.0);
        c.detail = std::to_string(cov.uncovered) + " uncovered, " + std::to_string(cov.multiple) +
                   " in several leaves, " + std::to_string(cov.endpoint) + " at endpoints";
        out.push_back(c);
        return out;
    }

    /// |x_F(t_*)| <= sqrt(n_F) r(F) and U2 - U1 <= 200 n_F^3 |x_F(t_*)| / |v_F|, as worst
    /// relative excess over all regular nodes with at least two balls.
    inline std::vector<CheckResult> check_node_inequalities(const BranchingTree &tree, double rel_tol = 1e-8)
    {
        double worst_x = -infinity, worst_u = -infinity;
        std::string wx, wu;
        for (const auto &s : tree.nodes)
        {
            if (s.size() < 2 || s.isolation_violated)
                continue;
            const double nf = static_cast<double>(s.size());
            const double lim_x = std::sqrt(nf) * s.r;
            const double ex = (s.x_norm_star - lim_x) / std::max(lim_x, 1e-300);
            if (ex > worst_x)
            {
                worst_x = ex;
                wx = "node " + std::to_string(s.id);
            }
            const double len = s.U2 - s.U1;
            double eu;
            if (len == 0.0)
                eu = -1.0;
            else if (!(s.v_norm > 0.0))
                eu = infinity;
            else
            {
                const double lim_u = 200.0 * nf * nf * nf * s.x_norm_star / s.v_norm;
                eu = (len - lim_u) / lim_u;
            }
            if (eu > worst_u)
            {
                worst_u = eu;
                wu = "node " + std::to_string(s.id);
            }
        }
        if (!std::isfinite(worst_x) && worst_x < 0)
            worst_x = -1.0;
        if (!std::isfinite(worst_u) && worst_u < 0)
            worst_u = -1.0;
        return {detail::at_most("node_x_radius_rel_excess", worst_x, rel_tol, wx),
                detail::at_most("node_u_length_rel_excess", worst_u, rel_tol, wu)};
    }

    inline std::vector<CheckResult> check_collision_bounds(const EventLog &log, const BranchingTree &tree,
                                                           const CoverageReport &cov)
    {
        const auto n = static_cast<long long>(log.size());
        const double ln_count = log.events.empty() ? -infinity : std::log(static_cast<double>(log.events.size()));
        std::vector<CheckResult> out;
        out.push_back(detail::at_most("main_bound_ln", ln_count, ln_main_bound(n, log.dim())));

        double worst = -infinity;
        std::string where;
        for (const auto &s : tree.nodes)
        {
            if (!s.is_leaf || cov.open_counts[s.id] == 0)
                continue;
            const double count = static_cast<double>(cov.open_counts[s.id]);
            double excess;
            if (s.size() <= 2)
                excess = std::log(count) - 0.0;
            else if (s.x_norm_star > 0.0)
                excess = std::log(count) - ln_interval_bound(static_cast<long long>(s.size()), log.dim(), s.x_norm_star);
            else
                excess = infinity;
            if (excess > worst)
            {
                worst = excess;
                where = "leaf " + std::to_string(s.id) + " holds " + std::to_string(cov.open_counts[s.id]);
            }
        }
        if (!std::isfinite(worst) && worst < 0)
            worst = -infinity;
        out.push_back(detail::at_most("leaf_count_ln_excess", std::isfinite(worst) ? worst : (worst < 0 ? -1.0 : worst),
                                      0.0, where));
        return out;
    }

} // namespace hardball
