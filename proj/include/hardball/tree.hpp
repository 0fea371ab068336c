#pragma once

#include "hardball/frame.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace hardball
{
    /// Evolution of a subfamily F on its own: identical to the recorded trajectory on [T1, T2],
    /// extended on both sides with collisions inside F only, until permanent free flight.
    /// Row k of `log` is ball members[k].
    struct GhostLog
    {
        std::vector<std::size_t> members;
        double T1 = -infinity;
        double T2 = infinity;
        EventLog log;
    };

    namespace detail
    {
        inline std::vector<int> local_index(std::size_t n, std::span<const std::size_t> members)
        {
            std::vector<int> local(n, -1);
            for (std::size_t k = 0; k < members.size(); ++k)
                local[members[k]] = static_cast<int>(k);
            return local;
        }

        inline void set_velocity(SystemState &s, std::size_t k, std::span<const double> v)
        {
            std::copy(v.begin(), v.end(), s.velocity(k).begin());
        }

        inline std::vector<std::size_t> normalized_members(std::vector<std::size_t> members, std::size_t n)
        {
            std::sort(members.begin(), members.end());
            members.erase(std::unique(members.begin(), members.end()), members.end());
            if (members.empty() || members.back() >= n)
                throw parameter_error{"bad subfamily member list"};
            return members;
        }

        inline CollisionEvent relabel(const CollisionEvent &e, const std::vector<int> &local)
        {
            CollisionEvent f = e;
            f.i = static_cast<std::size_t>(local[e.i]);
            f.j = static_cast<std::size_t>(local[e.j]);
            return f;
        }
    } // namespace detail

    /// Builds the ghost evolution of F. The backward tail starts from the state just before
    /// T1 (internal collisions at T1 undone), the forward tail from the state just after T2
    /// (collisions with outside balls at T2 ignored).
    inline GhostLog ghost_extend(const Trajectory &real, std::vector<std::size_t> members, double T1, double T2,
                                 std::size_t max_events = 100'000)
    {
        const EventLog &log = real.log();
        members = detail::normalized_members(std::move(members), log.size());
        if (!(T1 <= T2))
            throw parameter_error{"ghost_extend: T1 > T2"};
        if (const auto *e = find_external_collision(log, members, T1, T2))
        {
            std::ostringstream os;
            os.precision(17);
            os << "ghost_extend: subfamily collides with (" << e->i << "," << e->j << ") at t=" << e->t
               << " inside (" << T1 << ", " << T2 << ")";
            throw external_collision_error{os.str()};
        }
        const auto local = detail::local_index(log.size(), members);
        auto internal = [&](const CollisionEvent &e) { return local[e.i] >= 0 && local[e.j] >= 0; };

        GhostLog g;
        g.members = members;
        g.T1 = T1;
        g.T2 = T2;
        g.log.header = log.header;
        g.log.header.horizon.reset();

        SimulateOptions opt;
        opt.max_events = max_events;

        if (!std::isfinite(T1))
        {
            if (!log.past_free_flight)
                throw uncertified_tail_error{"ghost_extend: T1 = -inf needs a certified past"};
            g.log.initial = restrict_to(log.initial, members);
        }
        else
        {
            SystemState s = restrict_to(real.state_at(T1), members);
            for (const auto &e : log.events)
                if (e.t == T1 && internal(e))
                {
                    detail::set_velocity(s, static_cast<std::size_t>(local[e.i]), e.vi_pre);
                    detail::set_velocity(s, static_cast<std::size_t>(local[e.j]), e.vj_pre);
                }
            const EventLog back = simulate(reversed(s), opt);
            if (back.terminated == Termination::budget)
                throw budget_error{"ghost_extend: backward tail exceeded the event budget"};
            for (auto it = back.events.rbegin(); it != back.events.rend(); ++it)
            {
                CollisionEvent f;
                f.t = -it->t;
                f.i = it->i;
                f.j = it->j;
                f.xi = it->xi;
                f.xj = it->xj;
                f.vi_pre = it->vi_post;
                f.vj_pre = it->vj_post;
                f.vi_post = it->vi_pre;
                f.vj_post = it->vj_pre;
                for (auto *v : {&f.vi_pre, &f.vj_pre, &f.vi_post, &f.vj_post})
                    for (double &x : *v)
                        x = -x;
                g.log.events.push_back(std::move(f));
            }
            if (back.events.empty())
            {
                s.advance(-1.0);
                s.t = T1 - 1.0;
                g.log.initial = s;
            }
            else
                g.log.initial = reversed(Trajectory(back).state_at(back.events.back().t + 1.0));
        }

        for (const auto &e : log.events)
            if (e.t >= T1 && e.t <= T2 && internal(e))
                g.log.events.push_back(detail::relabel(e, local));

        if (!std::isfinite(T2))
        {
            if (!log.future_certified())
                throw uncertified_tail_error{"ghost_extend: T2 = +inf needs a certified future"};
        }
        else
        {
            SystemState s = restrict_to(real.state_at(T2), members);
            for (const auto &e : log.events)
                if (e.t == T2 && !internal(e) && (local[e.i] >= 0 || local[e.j] >= 0))
                {
                    if (local[e.i] >= 0)
                        detail::set_velocity(s, static_cast<std::size_t>(local[e.i]), e.vi_pre);
                    else
                        detail::set_velocity(s, static_cast<std::size_t>(local[e.j]), e.vj_pre);
                }
            const EventLog fwd = simulate(s, opt);
            if (fwd.terminated == Termination::budget)
                throw budget_error{"ghost_extend: forward tail exceeded the event budget"};
            for (const auto &e : fwd.events)
                g.log.events.push_back(e);
        }
        g.log.terminated = Termination::free_flight;
        g.log.past_free_flight = !next_event(reversed(g.log.initial)).has_value();
        return g;
    }

    struct SplitTimes
    {
        double T0 = 0.0;
        double S1 = 0.0;
        double S2 = 0.0;
        /// Component of local ball 0 in the graph of collisions before S1, and after S2.
        std::vector<std::size_t> before_part;
        std::vector<std::size_t> after_part;
    };

    namespace detail
    {
        inline std::vector<std::size_t> component_of_first(std::size_t n, std::span<const CollisionEvent> events)
        {
            disjoint_sets ds(n);
            for (const auto &e : events)
                ds.unite(e.i, e.j);
            std::vector<std::size_t> part;
            const auto root = ds.find(0);
            for (std::size_t k = 0; k < n; ++k)
                if (ds.find(k) == root)
                    part.push_back(k);
            return part;
        }
    } // namespace detail

    /// Split times of an isolated family, from its certified event list. S2 is the first
    /// t >= T0 for which the graph of collisions strictly after t is disconnected; S1 is the
    /// mirror image. T0 minimizes |x_F(t)| in the family's center-of-mass frame.
    inline SplitTimes split_times(const EventLog &family, std::optional<double> pivot = std::nullopt)
    {
        const std::size_t n = family.size();
        if (n < 2)
            throw degenerate_error{"split_times: a family needs at least two balls"};
        SplitTimes out;
        if (pivot)
            out.T0 = *pivot;
        else
        {
            std::vector<std::size_t> all(n);
            for (std::size_t k = 0; k < n; ++k)
                all[k] = k;
            out.T0 = find_t0(subfamily_frame(family, all, -infinity, infinity).log).t0;
        }

        const auto &ev = family.events;
        const std::size_t m = ev.size();
        std::vector<char> suffix_connected(m + 1, 0), prefix_connected(m + 1, 0);
        {
            disjoint_sets ds(n);
            for (std::size_t k = m; k-- > 0;)
            {
                ds.unite(ev[k].i, ev[k].j);
                suffix_connected[k] = ds.components() == 1;
            }
        }
        {
            disjoint_sets ds(n);
            for (std::size_t k = 0; k < m; ++k)
            {
                ds.unite(ev[k].i, ev[k].j);
                prefix_connected[k + 1] = ds.components() == 1;
            }
        }
        const double T0 = out.T0;

        // Events strictly after T0 start at index `first_after`.
        std::size_t first_after = 0;
        while (first_after < m && ev[first_after].t <= T0)
            ++first_after;
        out.S2 = T0;
        if (suffix_connected[first_after])
        {
            std::size_t k = 0;
            while (k < m && ev[k].t < T0)
                ++k;
            for (; k < m; ++k)
                if (!suffix_connected[k + 1])
                {
                    out.S2 = ev[k].t;
                    break;
                }
        }

        std::size_t before = 0; // events strictly before T0 are [0, before)
        while (before < m && ev[before].t < T0)
            ++before;
        out.S1 = T0;
        if (prefix_connected[before])
        {
            std::size_t k = m;
            while (k > 0 && ev[k - 1].t > T0)
                --k;
            // candidates ev[k-1], ev[k-2], ... all <= T0
            for (; k > 0; --k)
                if (!prefix_connected[k - 1])
                {
                    out.S1 = ev[k - 1].t;
                    break;
                }
        }

        std::size_t lo = 0;
        while (lo < m && ev[lo].t < out.S1)
            ++lo;
        out.before_part = detail::component_of_first(n, std::span(ev).first(lo));
        std::size_t hi = m;
        while (hi > 0 && ev[hi - 1].t > out.S2)
            --hi;
        out.after_part = detail::component_of_first(n, std::span(ev).subspan(hi));
        return out;
    }

    struct RadiusProfile
    {
        double r = 0.0;      // inf over [T1, T2] of the largest pair distance
        double t_star = 0.0; // earliest minimizer
    };

    namespace detail
    {
        /// Largest pair distance of `s` advanced by dt.
        inline double diameter_at(const SystemState &s, double dt)
        {
            const std::size_t n = s.size();
            const int d = s.dim;
            double best = 0.0;
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = a + 1; b < n; ++b)
                {
                    double q = 0.0;
                    for (int k = 0; k < d; ++k)
                    {
                        const double w = (s.position(a)[k] - s.position(b)[k]) + dt * (s.velocity(a)[k] - s.velocity(b)[k]);
                        q += w * w;
                    }
                    best = std::max(best, q);
                }
            return std::sqrt(best);
        }
    } // namespace detail

    /// r(F) and t_*(F) over [T1, T2] of a family trajectory. On each inter-event piece every
    /// pair distance is convex in t, hence so is their maximum; the piece minimum is found by
    /// golden-section search inside the hull of the pair-distance vertices.
    inline RadiusProfile r_profile(const Trajectory &family, double T1, double T2)
    {
        const EventLog &log = family.log();
        const std::size_t n = log.size();
        const std::size_t m = family.event_count();
        if (!(T1 <= T2))
            throw parameter_error{"r_profile: T1 > T2"};

        std::optional<RadiusProfile> best;
        for (std::size_t k = 0; k <= m; ++k)
        {
            const double piece_lo = k == 0 ? -infinity : log.events[k - 1].t;
            const double piece_hi = k == m ? infinity : log.events[k].t;
            const double lo = std::max(piece_lo, T1), hi = std::min(piece_hi, T2);
            if (lo > hi)
                continue;
            const SystemState &s = family.snapshot(k);

            double vmin = infinity, vmax = -infinity;
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = a + 1; b < n; ++b)
                {
                    const auto w = sub(s.position(a), s.position(b));
                    const auto u = sub(s.velocity(a), s.velocity(b));
                    const double uu = norm2(u);
                    if (uu > 0.0)
                    {
                        const double v = s.t - dot(w, u) / uu;
                        vmin = std::min(vmin, v);
                        vmax = std::max(vmax, v);
                    }
                }
            double a_lo, a_hi;
            if (vmin <= vmax)
            {
                a_lo = std::clamp(vmin, lo, hi);
                a_hi = std::clamp(vmax, lo, hi);
            }
            else
            {
                a_lo = a_hi = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : s.t);
            }
            auto f = [&](double t) { return detail::diameter_at(s, t - s.t); };

            double x0 = a_lo, x1 = a_hi;
            const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
            double c = x1 - phi * (x1 - x0), dd = x0 + phi * (x1 - x0);
            double fc = f(c), fd = f(dd);
            for (int it = 0; it < 300 && (x1 - x0) > 1e-15 * (1.0 + std::abs(x0)); ++it)
            {
                if (fc <= fd)
                {
                    x1 = dd;
                    dd = c;
                    fd = fc;
                    c = x1 - phi * (x1 - x0);
                    fc = f(c);
                }
                else
                {
                    x0 = c;
                    c = dd;
                    fc = fd;
                    dd = x0 + phi * (x1 - x0);
                    fd = f(dd);
                }
            }
            double t_best = (x0 + x1) / 2.0, f_best = f(t_best);
            for (double cand : {a_lo, a_hi})
                if (f(cand) < f_best)
                {
                    f_best = f(cand);
                    t_best = cand;
                }
            // Move to the left end of a flat minimum.
            const double slack = 1e-12 * (1.0 + f_best);
            if (f(a_lo) <= f_best + slack)
                t_best = a_lo;
            else
            {
                double l = a_lo, r = t_best;
                for (int it = 0; it < 200 && r - l > 1e-15 * (1.0 + std::abs(l)); ++it)
                {
                    const double mid = (l + r) / 2.0;
                    (f(mid) <= f_best + slack ? r : l) = mid;
                }
                t_best = r;
            }
            if (!best || f_best < best->r - 1e-12 * (1.0 + best->r))
                best = RadiusProfile{f_best, t_best};
            else if (f_best < best->r)
                best->r = f_best;
        }
        if (!best)
            throw parameter_error{"r_profile: empty interval"};
        return *best;
    }

    /// [U1, U2] = [S1, S2] intersected with [T1, T2]; an empty intersection collapses to the
    /// point max(S1, T1) clamped into [T1, T2].
    inline std::pair<double, double> u_interval(double S1, double S2, double T1, double T2)
    {
        double U1 = std::max(S1, T1), U2 = std::min(S2, T2);
        if (U1 > U2)
            U1 = U2 = std::clamp(std::max(S1, T1), T1, T2);
        return {U1, U2};
    }

    /// Splits a configuration into the proximity component of ball 0 and the rest. Two balls
    /// are linked when their surface gap |x_i - x_j| - 2 is at most beta.
    inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> beta_partition(const SystemState &s, double beta)
    {
        const std::size_t n = s.size();
        disjoint_sets ds(n);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (distance(s.position(a), s.position(b)) - contact_distance <= beta)
                    ds.unite(a, b);
        std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
        const auto root = ds.find(0);
        for (std::size_t k = 0; k < n; ++k)
            (ds.find(k) == root ? out.first : out.second).push_back(k);
        if (out.second.empty())
            throw connected_graph_error{"beta_partition: proximity graph is connected"};
        return out;
    }

    struct ChainSchedule
    {
        std::size_t k_star = 0;
        std::vector<double> times; // t_1 .. t_{k*+1}; a single entry when k* = 0
    };

    inline ChainSchedule chain_schedule(double U1, double U2, double v_norm, double beta)
    {
        if (!(beta > 0.0))
            throw parameter_error{"chain_schedule: beta must be positive"};
        ChainSchedule c;
        if (!(U2 > U1))
        {
            c.times = {U1};
            return c;
        }
        if (!(v_norm > 0.0))
        {
            c.k_star = 1;
            c.times = {U1, U2};
            return c;
        }
        c.k_star = static_cast<std::size_t>(std::ceil((U2 - U1) * v_norm / beta));
        c.times.reserve(c.k_star + 1);
        c.times.push_back(U1);
        for (std::size_t k = 2; k <= c.k_star; ++k)
            c.times.push_back(std::min(U1 + static_cast<double>(k - 1) * beta / v_norm, U2));
        c.times.push_back(U2);
        return c;
    }

    enum class NodeRole
    {
        root,
        before, // F1, F2 on [T1, U1]
        after,  // F3, F4 on [U2, T2]
        core,   // F5 = F on [U1, U2]
        chain   // H^k_i on [t_k, t_{k+1}]
    };

    inline const char *to_string(NodeRole r) noexcept
    {
        switch (r)
        {
        case NodeRole::root:
            return "root";
        case NodeRole::before:
            return "before";
        case NodeRole::after:
            return "after";
        case NodeRole::core:
            return "core";
        case NodeRole::chain:
            return "chain";
        }
        return "?";
    }

    /// Node datum (F, r, T1, T2, U1, U2) of the branching tree plus the quantities used to
    /// derive it.
    struct Sextuple
    {
        std::size_t id = 0;
        std::optional<std::size_t> parent;
        int depth = 1;
        NodeRole role = NodeRole::root;
        std::size_t chain_k = 0;

        std::vector<std::size_t> family;
        double r = 0.0;
        double T1 = -infinity, T2 = infinity;
        double U1 = 0.0, U2 = 0.0;
        double t_star = 0.0;
        double S1 = 0.0, S2 = 0.0, T0 = 0.0;
        double v_norm = 0.0;
        double x_norm_star = 0.0; // |x_F(t_*)| in the family frame

        bool is_leaf = true;
        bool degenerate = false;
        /// Set on chain offspring whose isolation on their interval failed in the recorded log.
        bool isolation_violated = false;
        double beta = 0.0;
        std::size_t k_star = 0;
        std::vector<std::size_t> offspring;

        std::size_t size() const noexcept { return family.size(); }
        bool contains(std::size_t ball) const { return std::binary_search(family.begin(), family.end(), ball); }
    };

    /// A collision between the two chain halves inside their common interval.
    struct ChainViolation
    {
        std::size_t node;
        std::size_t k;
        std::size_t event;
    };

    struct BranchingTree
    {
        std::size_t n = 0;
        int dim = 0;
        std::vector<Sextuple> nodes; // nodes[0] is the root; ids are preorder
        std::vector<ChainViolation> chain_violations;

        const Sextuple &root() const { return nodes.front(); }

        int depth() const
        {
            int d = 0;
            for (const auto &s : nodes)
                d = std::max(d, s.depth);
            return d;
        }

        std::size_t leaf_count() const
        {
            return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Sextuple &s) { return s.is_leaf; }));
        }
    };

    struct TreeOptions
    {
        std::size_t ghost_max_events = 100'000;
    };

    namespace detail
    {
        class TreeBuilder
        {
        public:
            TreeBuilder(const EventLog &log, const TreeOptions &opt) : real_(log), opt_(opt)
            {
                tree_.n = log.size();
                tree_.dim = log.dim();
            }

            BranchingTree run()
            {
                std::vector<std::size_t> all(tree_.n);
                for (std::size_t k = 0; k < tree_.n; ++k)
                    all[k] = k;
                build(all, -infinity, infinity, NodeRole::root, std::nullopt, 1, 0);
                return std::move(tree_);
            }

        private:
            std::vector<std::size_t> to_global(const std::vector<std::size_t> &members,
                                               const std::vector<std::size_t> &local) const
            {
                std::vector<std::size_t> g;
                g.reserve(local.size());
                for (auto k : local)
                    g.push_back(members[k]);
                return g;
            }

            static std::vector<std::size_t> complement(const std::vector<std::size_t> &all, const std::vector<std::size_t> &part)
            {
                std::vector<std::size_t> out;
                std::set_difference(all.begin(), all.end(), part.begin(), part.end(), std::back_inserter(out));
                return out;
            }

            std::size_t push(Sextuple node)
            {
                node.id = tree_.nodes.size();
                if (node.parent)
                    tree_.nodes[*node.parent].offspring.push_back(node.id);
                tree_.nodes.push_back(std::move(node));
                return tree_.nodes.size() - 1;
            }

            /// Fills a node that needs no ghost: singletons and single-instant intervals.
            Sextuple point_node(const std::vector<std::size_t> &family, double T1, double T2)
            {
                Sextuple s;
                s.family = family;
                s.T1 = T1;
                s.T2 = T2;
                double t_ref = std::isfinite(T1) ? T1 : (std::isfinite(T2) ? T2 : real_.log().initial.t);
                const SystemState st = restrict_to(real_.state_at(t_ref), family);
                const auto cbar = mean_rows(st.positions, st.size(), st.dim);
                const auto vbar = mean_rows(st.velocities, st.size(), st.dim);
                double xq = 0.0, vq = 0.0;
                for (std::size_t i = 0; i < st.size(); ++i)
                    for (int k = 0; k < st.dim; ++k)
                    {
                        xq += std::pow(st.position(i)[k] - cbar[k], 2);
                        vq += std::pow(st.velocity(i)[k] - vbar[k], 2);
                    }
                s.r = diameter_at(st, 0.0);
                s.t_star = t_ref;
                s.x_norm_star = std::sqrt(xq);
                s.v_norm = std::sqrt(vq);
                s.T0 = t_ref;
                s.S1 = T1;
                s.S2 = T2;
                s.U1 = T1;
                s.U2 = T2;
                s.is_leaf = true;
                s.degenerate = true;
                return s;
            }

            void build(const std::vector<std::size_t> &family, double T1, double T2, NodeRole role,
                       std::optional<std::size_t> parent, int depth, std::size_t chain_k)
            {
                const std::size_t nf = family.size();
                if (nf == 1 || T1 == T2)
                {
                    Sextuple s = point_node(family, T1, T2);
                    s.parent = parent;
                    s.depth = depth;
                    s.role = role;
                    s.chain_k = chain_k;
                    push(std::move(s));
                    return;
                }

                const GhostLog ghost = ghost_extend(real_, family, T1, T2, opt_.ghost_max_events);
                const Trajectory gt(ghost.log);
                std::vector<std::size_t> local_all(nf);
                for (std::size_t k = 0; k < nf; ++k)
                    local_all[k] = k;
                const SubfamilyFrame frame = subfamily_frame(gt, local_all, -infinity, infinity);
                const Trajectory centered(frame.log);
                const double T0 = find_t0(centered).t0;
                const SplitTimes split = split_times(ghost.log, T0);
                const RadiusProfile prof = r_profile(gt, T1, T2);

                Sextuple s;
                s.parent = parent;
                s.depth = depth;
                s.role = role;
                s.chain_k = chain_k;
                s.family = family;
                s.T1 = T1;
                s.T2 = T2;
                s.T0 = split.T0;
                s.S1 = split.S1;
                s.S2 = split.S2;
                s.r = prof.r;
                s.t_star = prof.t_star;
                s.v_norm = frame.speed;
                s.degenerate = frame.degenerate;
                s.x_norm_star = centered.state_at(prof.t_star).configuration_norm();
                std::tie(s.U1, s.U2) = u_interval(split.S1, split.S2, T1, T2);
                s.is_leaf = (s.U1 == T1 && s.U2 == T2) || nf <= 2;

                const std::size_t id = push(s);
                if (s.is_leaf)
                    return;
                if (depth >= static_cast<int>(tree_.n) + 1)
                    throw depth_error{"build_tree: generation count exceeds n"};

                const auto F1 = to_global(family, split.before_part);
                const auto F3 = to_global(family, split.after_part);
                const double U1 = s.U1, U2 = s.U2;
                build(F1, T1, U1, NodeRole::before, id, depth + 1, 0);
                build(complement(family, F1), T1, U1, NodeRole::before, id, depth + 1, 0);
                build(F3, U2, T2, NodeRole::after, id, depth + 1, 0);
                build(complement(family, F3), U2, T2, NodeRole::after, id, depth + 1, 0);

                if (s.r <= 4.0 * static_cast<double>(nf))
                {
                    Sextuple c = s;
                    c.offspring.clear();
                    c.parent = id;
                    c.depth = depth + 1;
                    c.role = NodeRole::core;
                    c.T1 = U1;
                    c.T2 = U2;
                    c.U1 = U1;
                    c.U2 = U2;
                    const RadiusProfile cp = r_profile(gt, U1, U2);
                    c.r = cp.r;
                    c.t_star = cp.t_star;
                    c.x_norm_star = centered.state_at(cp.t_star).configuration_norm();
                    c.is_leaf = true;
                    push(std::move(c));
                    return;
                }

                const double beta = (s.r - 2.0 * static_cast<double>(nf)) / static_cast<double>(nf - 1);
                const ChainSchedule sched = chain_schedule(U1, U2, s.v_norm, beta);
                tree_.nodes[id].beta = beta;
                tree_.nodes[id].k_star = sched.k_star;
                for (std::size_t k = 1; k <= sched.k_star; ++k)
                {
                    const double tk = sched.times[k - 1], tk1 = sched.times[k];
                    const SystemState at = gt.state_at(tk);
                    const auto [h1_local, h2_local] = beta_partition(at, beta);
                    const auto H1 = to_global(family, h1_local), H2 = to_global(family, h2_local);

                    bool violated = false;
                    std::vector<char> side(tree_.n, 0);
                    for (auto b : H1)
                        side[b] = 1;
                    for (auto b : H2)
                        side[b] = 2;
                    const auto &events = real_.log().events;
                    for (std::size_t e = 0; e < events.size(); ++e)
                        if (events[e].t > tk && events[e].t < tk1 && side[events[e].i] && side[events[e].j] &&
                            side[events[e].i] != side[events[e].j])
                        {
                            tree_.chain_violations.push_back({id, k, e});
                            violated = true;
                        }
                    for (const auto *H : {&H1, &H2})
                    {
                        if (!violated)
                        {
                            build(*H, tk, tk1, NodeRole::chain, id, depth + 1, k);
                            continue;
                        }
                        Sextuple v = point_node(*H, tk, tk1);
                        v.parent = id;
                        v.depth = depth + 1;
                        v.role = NodeRole::chain;
                        v.chain_k = k;
                        v.isolation_violated = true;
                        push(std::move(v));
                    }
                }
            }

            Trajectory real_;
            TreeOptions opt_;
            BranchingTree tree_;
        };
    } // namespace detail

    /// Builds the branching family over a log with certified free-flight tails. The root
    /// covers (-inf, inf) with all balls.
    inline BranchingTree build_tree(const EventLog &log, const TreeOptions &opt = {})
    {
        if (!log.both_tails_certified())
            throw uncertified_tail_error{"build_tree needs a log with free-flight past and future"};
        return detail::TreeBuilder(log, opt).run();
    }

    enum class Bucket
    {
        open,      // strictly inside exactly one leaf interval
        endpoint,  // at T1 or T2 of some node
        uncovered, // neither
        multiple   // inside more than one leaf interval
    };

    inline const char *to_string(Bucket b) noexcept
    {
        switch (b)
        {
        case Bucket::open:
            return "open";
        case Bucket::endpoint:
            return "endpoint";
        case Bucket::uncovered:
            return "uncovered";
        case Bucket::multiple:
            return "multiple";
        }
        return "?";
    }

    struct CoverageRow
    {
        std::size_t event;
        std::optional<std::size_t> node;
        Bucket bucket;
    };

    struct CoverageReport
    {
        std::vector<CoverageRow> rows;
        std::vector<std::size_t> open_counts; // per node id; nonzero only for leaves
        std::size_t uncovered = 0;
        std::size_t multiple = 0;
        std::size_t endpoint = 0;

        bool ok() const noexcept { return uncovered == 0 && multiple == 0; }
    };

    /// Assigns every collision of `log` to the leaf whose open interval contains it, or to the
    /// endpoint bucket. A collision at the instant T1 or T2 of any node is an endpoint
    /// collision whether or not that node holds both balls; the reported node is the first
    /// one holding both balls, else the first one with that endpoint.
    inline CoverageReport assign_collisions(const EventLog &log, const BranchingTree &tree)
    {
        CoverageReport rep;
        rep.open_counts.assign(tree.nodes.size(), 0);
        for (std::size_t e = 0; e < log.events.size(); ++e)
        {
            const auto &ev = log.events[e];
            const double slack = tol::time * std::max(1.0, std::abs(ev.t));
            std::optional<std::size_t> open_leaf, end_node;
            std::size_t open_hits = 0;
            std::optional<std::size_t> end_any;
            for (const auto &s : tree.nodes)
            {
                const bool at_end = std::abs(ev.t - s.T1) <= slack || std::abs(ev.t - s.T2) <= slack;
                if (at_end && !end_any)
                    end_any = s.id;
                if (!s.contains(ev.i) || !s.contains(ev.j))
                    continue;
                if (at_end)
                {
                    if (!end_node)
                        end_node = s.id;
                    continue;
                }
                if (s.is_leaf && ev.t > s.T1 && ev.t < s.T2)
                {
                    ++open_hits;
                    if (!open_leaf)
                        open_leaf = s.id;
                }
            }
            CoverageRow row{e, std::nullopt, Bucket::uncovered};
            if (open_hits == 1)
            {
                row = {e, open_leaf, Bucket::open};
                ++rep.open_counts[*open_leaf];
            }
            else if (open_hits > 1)
            {
                row = {e, open_leaf, Bucket::multiple};
                ++rep.multiple;
            }
            else if (end_node || end_any)
            {
                row = {e, end_node ? end_node : end_any, Bucket::endpoint};
                ++rep.endpoint;
            }
            else
                ++rep.uncovered;
            rep.rows.push_back(row);
        }
        return rep;
    }

    namespace detail
    {
        inline nlohmann::json time_json(double t)
        {
            if (std::isinf(t))
                return t > 0 ? "inf" : "-inf";
            return t;
        }

        inline nlohmann::json node_json(const BranchingTree &tree, std::size_t id)
        {
            const Sextuple &s = tree.nodes[id];
            nlohmann::json j;
            j["id"] = s.id;
            j["role"] = to_string(s.role);
            if (s.role == NodeRole::chain)
                j["chain_k"] = s.chain_k;
            j["depth"] = s.depth;
            j["family"] = s.family;
            j["r"] = s.r;
            j["T1"] = time_json(s.T1);
            j["T2"] = time_json(s.T2);
            j["U1"] = time_json(s.U1);
            j["U2"] = time_json(s.U2);
            j["t_star"] = s.t_star;
            j["S1"] = time_json(s.S1);
            j["S2"] = time_json(s.S2);
            j["T0"] = s.T0;
            j["v_norm"] = s.v_norm;
            j["x_norm_star"] = s.x_norm_star;
            j["is_leaf"] = s.is_leaf;
            j["degenerate"] = s.degenerate;
            if (s.isolation_violated)
                j["isolation_violated"] = true;
            if (s.k_star > 0 || s.beta > 0.0)
            {
                j["beta"] = s.beta;
                j["k_star"] = s.k_star;
            }
            nlohmann::json kids = nlohmann::json::array();
            for (auto c : s.offspring)
                kids.push_back(node_json(tree, c));
            j["offspring"] = kids;
            return j;
        }
    } // namespace detail

    /// Nested JSON rendering of the tree, root first.
    inline nlohmann::json to_json(const BranchingTree &tree)
    {
        nlohmann::json j;
        j["n"] = tree.n;
        j["d"] = tree.dim;
        j["node_count"] = tree.nodes.size();
        j["leaf_count"] = tree.leaf_count();
        j["depth"] = tree.depth();
        nlohmann::json viol = nlohmann::json::array();
        for (const auto &v : tree.chain_violations)
            viol.push_back({{"node", v.node}, {"k", v.k}, {"event", v.event}});
        j["chain_violations"] = viol;
        j["root"] = detail::node_json(tree, 0);
        return j;
    }

    /// CSV: event_id,leaf_id,bucket. leaf_id is empty for uncovered events.
    inline void write_coverage_csv(std::ostream &os, const CoverageReport &rep)
    {
        os << "event_id,leaf_id,bucket\n";
        for (const auto &r : rep.rows)
        {
            os << r.event << ',';
            if (r.node)
                os << *r.node;
            os << ',' << to_string(r.bucket) << '\n';
        }
    }

} // namespace hardball
