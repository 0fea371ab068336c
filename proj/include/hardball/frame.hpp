#pragma once

#include "hardball/dynamics.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

namespace hardball
{
    struct AlphaSample
    {
        double t;
        double alpha; // angle between x(t) and v(t+), radians
    };

    struct PivotTime
    {
        double t0;
        double x_norm; // |x(t0)|
    };

    /// Inertial-frame change and speed rescaling applied by normalize().
    struct FrameReport
    {
        std::vector<double> momentum_shift; // z/n, subtracted from every velocity
        double origin_time = 0.0;           // fixed point of the time rescaling
        std::vector<double> center_at_origin;
        std::vector<double> center_velocity; // center shift is center_at_origin + (t - origin_time) * center_velocity
        double speed_scale = 1.0;            // c1
        std::optional<PivotTime> pivot;
        std::vector<AlphaSample> alpha_profile;
    };

    inline nlohmann::json to_json(const FrameReport &r)
    {
        nlohmann::json j;
        j["momentum_shift"] = r.momentum_shift;
        j["center_shift"] = {{"origin_time", r.origin_time},
                             {"position", r.center_at_origin},
                             {"velocity", r.center_velocity}};
        j["speed_scale"] = r.speed_scale;
        j["t0"] = r.pivot ? nlohmann::json(r.pivot->t0) : nlohmann::json(nullptr);
        j["x_norm_at_t0"] = r.pivot ? nlohmann::json(r.pivot->x_norm) : nlohmann::json(nullptr);
        nlohmann::json alpha = nlohmann::json::array();
        for (const auto &a : r.alpha_profile)
            alpha.push_back({{"t", a.t}, {"alpha", a.alpha}});
        j["alpha_profile"] = alpha;
        return j;
    }

    namespace detail
    {
        inline std::vector<double> mean_rows(std::span<const double> flat, std::size_t n, int d)
        {
            std::vector<double> m(static_cast<std::size_t>(d), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (int k = 0; k < d; ++k)
                    m[k] += flat[i * d + k];
            for (double &x : m)
                x /= static_cast<double>(n);
            return m;
        }
    } // namespace detail

    /// Minimizer of |x(t)| over the whole certified trajectory. |x(t)|^2 is a convex quadratic
    /// on each inter-event piece, so the minimum is a clamped vertex of one piece. Ties go to
    /// the earliest piece.
    inline PivotTime find_t0(const Trajectory &traj)
    {
        const auto &log = traj.log();
        if (!log.both_tails_certified())
            throw uncertified_tail_error{"find_t0 needs a log with free-flight past and future"};
        const std::size_t m = traj.event_count();
        std::optional<PivotTime> best;
        for (std::size_t k = 0; k <= m; ++k)
        {
            const SystemState &s = traj.snapshot(k);
            const double lo = k == 0 ? -infinity : log.events[k - 1].t;
            const double hi = k == m ? infinity : log.events[k].t;
            const double vv = norm2(s.velocities);
            const double xv = dot(s.positions, s.velocities);
            double t;
            if (vv > 0.0)
                t = std::clamp(s.t - xv / vv, lo, hi);
            else
                t = std::isfinite(lo) ? lo : (std::isfinite(hi) ? std::min(hi, log.initial.t) : log.initial.t);
            const double dt = t - s.t;
            double q = 0.0;
            for (std::size_t c = 0; c < s.positions.size(); ++c)
            {
                const double x = s.positions[c] + dt * s.velocities[c];
                q += x * x;
            }
            const double value = std::sqrt(q);
            if (!best || value < best->x_norm)
                best = PivotTime{t, value};
        }
        return *best;
    }

    inline PivotTime find_t0(const EventLog &log) { return find_t0(Trajectory(log)); }

    /// alpha(t) sampled at the given times; diagnostic only.
    inline std::vector<AlphaSample> alpha_profile(const Trajectory &traj, std::span<const double> times)
    {
        std::vector<AlphaSample> out;
        out.reserve(times.size());
        for (double t : times)
        {
            const SystemState s = traj.state_at(t);
            const double xn = norm(s.positions), vn = norm(s.velocities);
            double a = std::numbers::pi / 2;
            if (xn > 0.0 && vn > 0.0)
                a = std::acos(std::clamp(dot(s.positions, s.velocities) / (xn * vn), -1.0, 1.0));
            out.push_back({t, a});
        }
        return out;
    }

    /// Moves a log into the frame with zero momentum and center of mass at the origin, then
    /// rescales velocities so |v| = 1. Times are rescaled about the log's initial time, so the
    /// order and the pairs of all collisions are unchanged.
    inline std::pair<EventLog, FrameReport> normalize(const EventLog &log, std::size_t alpha_samples = 0)
    {
        const std::size_t n = log.size();
        const int d = log.dim();
        if (n == 0)
            throw parameter_error{"normalize: empty log"};

        FrameReport rep;
        rep.origin_time = log.initial.t;
        rep.momentum_shift = detail::mean_rows(log.initial.velocities, n, d);
        rep.center_velocity = rep.momentum_shift;
        rep.center_at_origin = detail::mean_rows(log.initial.positions, n, d);

        double energy = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (int k = 0; k < d; ++k)
            {
                const double v = log.initial.velocity(i)[k] - rep.momentum_shift[k];
                energy += v * v;
            }
        if (!(energy > 0.0))
            throw zero_energy_error{"normalize: zero kinetic energy after removing momentum"};
        const double c = 1.0 / std::sqrt(energy);
        rep.speed_scale = c;

        const double t_ref = rep.origin_time;
        auto map_time = [&](double t) { return t_ref + (t - t_ref) / c; };
        auto map_pos = [&](std::span<const double> x, double t) {
            std::vector<double> y(d);
            for (int k = 0; k < d; ++k)
                y[k] = x[k] - (rep.center_at_origin[k] + (t - t_ref) * rep.center_velocity[k]);
            return y;
        };
        auto map_vel = [&](std::span<const double> v) {
            std::vector<double> u(d);
            for (int k = 0; k < d; ++k)
                u[k] = (v[k] - rep.momentum_shift[k]) * c;
            return u;
        };

        EventLog out;
        out.header = log.header;
        if (log.header.horizon)
            out.header.horizon = map_time(*log.header.horizon);
        out.terminated = log.terminated;
        out.past_free_flight = log.past_free_flight;
        out.initial = SystemState(d, n, log.initial.t);
        for (std::size_t i = 0; i < n; ++i)
        {
            auto x = map_pos(log.initial.position(i), log.initial.t);
            auto v = map_vel(log.initial.velocity(i));
            std::copy(x.begin(), x.end(), out.initial.position(i).begin());
            std::copy(v.begin(), v.end(), out.initial.velocity(i).begin());
        }
        out.events.reserve(log.events.size());
        for (const auto &e : log.events)
        {
            CollisionEvent f;
            f.t = map_time(e.t);
            f.i = e.i;
            f.j = e.j;
            f.xi = map_pos(e.xi, e.t);
            f.xj = map_pos(e.xj, e.t);
            f.vi_pre = map_vel(e.vi_pre);
            f.vj_pre = map_vel(e.vj_pre);
            f.vi_post = map_vel(e.vi_post);
            f.vj_post = map_vel(e.vj_post);
            out.events.push_back(std::move(f));
        }

        if (out.both_tails_certified())
        {
            Trajectory traj(out);
            rep.pivot = find_t0(traj);
            if (alpha_samples > 0)
            {
                const double t_lo = out.events.empty() ? rep.pivot->t0 - 1.0 : std::min(out.events.front().t, rep.pivot->t0) - 1.0;
                const double t_hi = out.events.empty() ? rep.pivot->t0 + 1.0 : std::max(out.events.back().t, rep.pivot->t0) + 1.0;
                std::vector<double> times(alpha_samples);
                for (std::size_t k = 0; k < alpha_samples; ++k)
                    times[k] = t_lo + (t_hi - t_lo) * (static_cast<double>(k) + 0.5) / static_cast<double>(alpha_samples);
                rep.alpha_profile = alpha_profile(traj, times);
            }
        }
        return {std::move(out), std::move(rep)};
    }

    /// A subfamily's trajectory in its own center-of-mass frame.
    struct SubfamilyFrame
    {
        std::vector<std::size_t> members; // global indices, ascending; row k of `log` is members[k]
        EventLog log;
        double speed = 0.0; // |v_F|, constant while F is isolated
        bool degenerate = false;
    };

    /// First event on (T1, T2) that joins a member of F with a ball outside F, if any.
    inline const CollisionEvent *find_external_collision(const EventLog &log, std::span<const std::size_t> members,
                                                         double T1, double T2)
    {
        std::vector<char> in(log.size(), 0);
        for (auto m : members)
            in[m] = 1;
        for (const auto &e : log.events)
            if (e.t > T1 && e.t < T2 && in[e.i] != in[e.j])
                return &e;
        return nullptr;
    }

    /// Restriction of `traj` to F on [T1, T2], translated so the centroid of F stays at the
    /// origin. F must not collide with outside balls on (T1, T2).
    inline SubfamilyFrame subfamily_frame(const Trajectory &traj, std::vector<std::size_t> members, double T1, double T2)
    {
        const EventLog &log = traj.log();
        std::sort(members.begin(), members.end());
        members.erase(std::unique(members.begin(), members.end()), members.end());
        if (members.empty() || members.back() >= log.size())
            throw parameter_error{"subfamily_frame: bad member list"};
        if (const auto *e = find_external_collision(log, members, T1, T2))
        {
            std::ostringstream os;
            os.precision(17);
            os << "subfamily_frame: external collision (" << e->i << "," << e->j << ") at t=" << e->t;
            throw external_collision_error{os.str()};
        }

        const int d = log.dim();
        const std::size_t nf = members.size();
        const double ts = std::isfinite(T1) ? T1 : log.initial.t;
        const SystemState full = traj.state_at(ts);
        SystemState start = restrict_to(full, members);

        std::vector<int> local(log.size(), -1);
        for (std::size_t k = 0; k < nf; ++k)
            local[members[k]] = static_cast<int>(k);

        const auto cbar = detail::mean_rows(start.positions, nf, d);
        const auto vbar = detail::mean_rows(start.velocities, nf, d);
        auto shift = [&](std::span<const double> x, double t) {
            std::vector<double> y(d);
            for (int k = 0; k < d; ++k)
                y[k] = x[k] - (cbar[k] + (t - ts) * vbar[k]);
            return y;
        };
        auto boost = [&](std::span<const double> v) {
            std::vector<double> u(d);
            for (int k = 0; k < d; ++k)
                u[k] = v[k] - vbar[k];
            return u;
        };

        SubfamilyFrame out;
        out.members = members;
        out.log.header = log.header;
        out.log.initial = SystemState(d, nf, ts);
        for (std::size_t k = 0; k < nf; ++k)
        {
            auto x = shift(start.position(k), ts);
            auto v = boost(start.velocity(k));
            std::copy(x.begin(), x.end(), out.log.initial.position(k).begin());
            std::copy(v.begin(), v.end(), out.log.initial.velocity(k).begin());
        }
        for (const auto &e : log.events)
        {
            if (!(e.t > ts && e.t <= T2) || local[e.i] < 0 || local[e.j] < 0)
                continue;
            CollisionEvent f;
            f.t = e.t;
            f.i = static_cast<std::size_t>(local[e.i]);
            f.j = static_cast<std::size_t>(local[e.j]);
            f.xi = shift(e.xi, e.t);
            f.xj = shift(e.xj, e.t);
            f.vi_pre = boost(e.vi_pre);
            f.vj_pre = boost(e.vj_pre);
            f.vi_post = boost(e.vi_post);
            f.vj_post = boost(e.vj_post);
            out.log.events.push_back(std::move(f));
        }
        out.log.past_free_flight = !std::isfinite(T1) && log.past_free_flight;
        if (!std::isfinite(T2) && log.future_certified())
        {
            out.log.terminated = Termination::free_flight;
            out.log.header.horizon.reset();
        }
        else
        {
            out.log.terminated = Termination::horizon;
            out.log.header.horizon = std::isfinite(T2) ? T2 : traj.span_end();
        }
        out.speed = norm(out.log.initial.velocities);
        out.degenerate = nf < 2 || !(out.speed > 0.0);
        return out;
    }

    inline SubfamilyFrame subfamily_frame(const EventLog &log, std::vector<std::size_t> members, double T1, double T2)
    {
        return subfamily_frame(Trajectory(log), std::move(members), T1, T2);
    }

} // namespace hardball
