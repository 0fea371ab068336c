#pragma once

#include "hardball/state.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <vector>

namespace hardball
{
    /// Earliest t > 0 with |w + t u| = 2 while approaching, for relative position w and
    /// relative velocity u. Receding pairs, misses and exact grazing contacts return none.
    inline std::optional<double> pair_collision_time(std::span<const double> w, std::span<const double> u)
    {
        const double c = norm2(w) - contact_distance * contact_distance;
        if (std::sqrt(norm2(w)) < contact_distance - tol::geom)
            throw overlap_error{"pair_collision_time: balls overlap"};
        const double b = dot(w, u);
        if (b >= 0.0)
            return std::nullopt;
        const double a = norm2(u);
        const double disc = b * b - a * c;
        if (disc <= 0.0)
            return std::nullopt;
        // c / (-b + sqrt(disc)) is the smaller root without cancellation.
        const double t = c / (-b + std::sqrt(disc));
        return std::max(t, 0.0);
    }

    /// Time until balls i and j of s touch, or none.
    inline std::optional<double> pair_collision_time(const SystemState &s, std::size_t i, std::size_t j)
    {
        const auto w = sub(s.position(i), s.position(j));
        const auto u = sub(s.velocity(i), s.velocity(j));
        return pair_collision_time(w, u);
    }

    /// Exchanges the components of v_i and v_j along the unit center line. Everything else,
    /// including the orthogonal components, is left as is.
    inline void apply_collision_in_place(SystemState &s, std::size_t i, std::size_t j)
    {
        const auto w = sub(s.position(i), s.position(j));
        const double dist = norm(w);
        if (std::abs(dist - contact_distance) > tol::geom)
        {
            std::ostringstream os;
            os << "apply_collision: balls " << i << "," << j << " not in contact (distance " << dist << ")";
            throw non_contact_error{os.str()};
        }
        auto vi = s.velocity(i);
        auto vj = s.velocity(j);
        double approach = 0.0;
        for (int k = 0; k < s.dim; ++k)
            approach += (vi[k] - vj[k]) * w[k];
        if (!(approach < 0.0))
            throw non_approaching_error{"apply_collision: balls are not approaching"};
        double p = 0.0;
        for (int k = 0; k < s.dim; ++k)
            p += (vi[k] - vj[k]) * (w[k] / dist);
        for (int k = 0; k < s.dim; ++k)
        {
            const double nk = w[k] / dist;
            vi[k] -= p * nk;
            vj[k] += p * nk;
        }
    }

    inline SystemState apply_collision(SystemState s, std::size_t i, std::size_t j)
    {
        apply_collision_in_place(s, i, j);
        return s;
    }

    struct ScheduledEvent
    {
        double t;
        std::size_t i, j;
    };

    namespace detail
    {
        [[noreturn]] inline void throw_simultaneous(const ScheduledEvent &a, const ScheduledEvent &b)
        {
            std::ostringstream os;
            os.precision(17);
            os << "simultaneous collisions: (" << a.i << "," << a.j << ")@" << a.t << " and (" << b.i << ","
               << b.j << ")@" << b.t;
            throw simultaneity_error{os.str(), a.t};
        }
    } // namespace detail

    /// Exhaustive O(n^2) scan for the next collision, in absolute time. This is the reference
    /// scheduler; simulate() must agree with it.
    inline std::optional<ScheduledEvent> next_event(const SystemState &s)
    {
        std::optional<ScheduledEvent> best, second;
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = i + 1; j < s.size(); ++j)
            {
                auto dt = pair_collision_time(s, i, j);
                if (!dt)
                    continue;
                ScheduledEvent e{s.t + *dt, i, j};
                if (!best || e.t < best->t)
                {
                    second = best;
                    best = e;
                }
                else if (!second || e.t < second->t)
                    second = e;
            }
        if (best && second && second->t - best->t < tol::time)
            detail::throw_simultaneous(*best, *second);
        return best;
    }

    /// Cached per-pair collision times. After a collision only pairs touching one of the two
    /// balls are recomputed; all other pairs keep moving on unchanged straight lines.
    class EventQueue
    {
    public:
        explicit EventQueue(const SystemState &s) : n_(s.size()), times_(n_ * n_, infinity)
        {
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = i + 1; j < n_; ++j)
                    refresh(s, i, j);
        }

        void invalidate(const SystemState &s, std::size_t a, std::size_t b)
        {
            for (std::size_t k = 0; k < n_; ++k)
            {
                if (k != a)
                    refresh(s, std::min(a, k), std::max(a, k));
                if (k != b && k != a)
                    refresh(s, std::min(b, k), std::max(b, k));
            }
        }

        std::optional<ScheduledEvent> next() const
        {
            std::optional<ScheduledEvent> best, second;
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = i + 1; j < n_; ++j)
                {
                    const double t = times_[i * n_ + j];
                    if (t == infinity)
                        continue;
                    if (!best || t < best->t)
                    {
                        second = best;
                        best = ScheduledEvent{t, i, j};
                    }
                    else if (!second || t < second->t)
                        second = ScheduledEvent{t, i, j};
                }
            if (best && second && second->t - best->t < tol::time)
                detail::throw_simultaneous(*best, *second);
            return best;
        }

    private:
        void refresh(const SystemState &s, std::size_t i, std::size_t j)
        {
            auto dt = pair_collision_time(s, i, j);
            times_[i * n_ + j] = dt ? s.t + *dt : infinity;
        }

        std::size_t n_;
        std::vector<double> times_;
    };

    struct SimulateOptions
    {
        std::optional<double> horizon;
        std::size_t max_events = 1'000'000;
    };

    /// Event-driven evolution from `initial`. Stops at free flight, at the horizon, or when the
    /// event budget is used up; the reason is recorded in the log.
    inline EventLog simulate(const SystemState &initial, const SimulateOptions &opt = {})
    {
        initial.validate();
        EventLog log;
        log.initial = initial;
        log.header.horizon = opt.horizon;

        SystemState s = initial;
        EventQueue queue(s);
        for (;;)
        {
            auto next = queue.next();
            if (!next)
            {
                log.terminated = Termination::free_flight;
                break;
            }
            if (opt.horizon && next->t > *opt.horizon)
            {
                log.terminated = Termination::horizon;
                break;
            }
            if (log.events.size() >= opt.max_events)
            {
                log.terminated = Termination::budget;
                break;
            }
            s.advance(next->t - s.t);
            s.t = next->t;

            CollisionEvent e;
            e.t = next->t;
            e.i = next->i;
            e.j = next->j;
            auto xi = s.position(e.i), xj = s.position(e.j);
            e.xi.assign(xi.begin(), xi.end());
            e.xj.assign(xj.begin(), xj.end());
            auto vi = s.velocity(e.i), vj = s.velocity(e.j);
            e.vi_pre.assign(vi.begin(), vi.end());
            e.vj_pre.assign(vj.begin(), vj.end());
            apply_collision_in_place(s, e.i, e.j);
            e.vi_post.assign(vi.begin(), vi.end());
            e.vj_post.assign(vj.begin(), vj.end());
            log.events.push_back(std::move(e));

            queue.invalidate(s, next->i, next->j);
        }
        log.past_free_flight = !next_event(reversed(initial)).has_value();
        return log;
    }

    /// Random-access view of a log: snapshots of the full state after every event, built by
    /// replaying the recorded velocity changes over exact linear flights.
    class Trajectory
    {
    public:
        explicit Trajectory(EventLog log) : log_(std::move(log))
        {
            snapshots_.reserve(log_.events.size() + 1);
            snapshots_.push_back(log_.initial);
            SystemState s = log_.initial;
            for (const auto &e : log_.events)
            {
                s.advance(e.t - s.t);
                s.t = e.t;
                auto vi = s.velocity(e.i), vj = s.velocity(e.j);
                std::copy(e.vi_post.begin(), e.vi_post.end(), vi.begin());
                std::copy(e.vj_post.begin(), e.vj_post.end(), vj.begin());
                snapshots_.push_back(s);
            }
        }

        const EventLog &log() const noexcept { return log_; }
        std::size_t event_count() const noexcept { return log_.events.size(); }

        /// State right after event k (k = 0 is the initial state, k = m is after the last event).
        const SystemState &snapshot(std::size_t k) const { return snapshots_.at(k); }

        /// Earliest time covered; -inf when the past is certified free flight.
        double span_begin() const noexcept { return log_.past_free_flight ? -infinity : log_.initial.t; }

        double span_end() const noexcept
        {
            switch (log_.terminated)
            {
            case Termination::free_flight:
                return infinity;
            case Termination::horizon:
                return log_.header.horizon.value_or(last_time());
            case Termination::budget:
                break;
            }
            return last_time();
        }

        double last_time() const noexcept { return log_.events.empty() ? log_.initial.t : log_.events.back().t; }

        /// Index of the snapshot valid at t: the number of events with time <= t.
        std::size_t piece_index(double t) const noexcept
        {
            auto it = std::upper_bound(log_.events.begin(), log_.events.end(), t,
                                       [](double tt, const CollisionEvent &e) { return tt < e.t; });
            return static_cast<std::size_t>(it - log_.events.begin());
        }

        /// Positions by linear interpolation; velocities are v(t+).
        SystemState state_at(double t) const
        {
            if (t < span_begin() || t > span_end())
            {
                std::ostringstream os;
                os.precision(17);
                os << "state_at: t=" << t << " outside certified span [" << span_begin() << ", " << span_end() << "]";
                throw out_of_span_error{os.str()};
            }
            SystemState s = snapshots_[piece_index(t)];
            s.advance(t - s.t);
            s.t = t;
            return s;
        }

    private:
        EventLog log_;
        std::vector<SystemState> snapshots_;
    };

    inline SystemState state_at(const EventLog &log, double t) { return Trajectory(log).state_at(t); }

    /// Smallest pair distance over all event instants and sample_count evenly spaced times
    /// between the initial time and the last event.
    inline double min_gap(const EventLog &log, std::size_t sample_count)
    {
        Trajectory traj(log);
        double best = log.initial.min_pair_distance();
        for (const auto &e : log.events)
            best = std::min(best, distance(e.xi, e.xj));
        for (std::size_t k = 0; k <= traj.event_count(); ++k)
            best = std::min(best, traj.snapshot(k).min_pair_distance());
        const double t0 = log.initial.t, t1 = traj.last_time();
        if (sample_count > 0 && t1 > t0)
            for (std::size_t k = 0; k <= sample_count; ++k)
            {
                const double t = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(sample_count);
                best = std::min(best, traj.state_at(t).min_pair_distance());
            }
        return best;
    }

    /// Builds a log from `s` whose past and future are both certified free flight: the state is
    /// first evolved backward (reversed velocities) until no further collisions occur, then
    /// simulated forward from a point in that free-flight past.
    inline EventLog complete_log(const SystemState &s, const SimulateOptions &opt = {})
    {
        SimulateOptions back_opt;
        back_opt.max_events = opt.max_events;
        EventLog back = simulate(reversed(s), back_opt);
        if (back.terminated == Termination::budget)
            throw budget_error{"complete_log: backward extension exceeded the event budget"};

        SystemState start = s;
        if (!back.events.empty())
        {
            const double s_end = back.events.back().t + 1.0;
            start = reversed(Trajectory(back).state_at(s_end));
        }
        EventLog log = simulate(start, opt);
        return log;
    }

} // namespace hardball
