#pragma once

#include "hardball/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hardball
{
    /// Phase point (x(t), v(t+)) of n unit balls in R^dim. Storage is row-major, one row per ball.
    struct SystemState
    {
        int dim = 2;
        double t = 0.0;
        std::vector<double> positions;
        std::vector<double> velocities;

        SystemState() = default;

        SystemState(int d, std::size_t n, double time = 0.0)
            : dim(d), t(time), positions(n * static_cast<std::size_t>(d), 0.0),
              velocities(n * static_cast<std::size_t>(d), 0.0)
        {
        }

        std::size_t size() const noexcept
        {
            return dim > 0 ? positions.size() / static_cast<std::size_t>(dim) : 0;
        }

        std::span<double> position(std::size_t i) noexcept
        {
            return {positions.data() + i * dim, static_cast<std::size_t>(dim)};
        }
        std::span<const double> position(std::size_t i) const noexcept
        {
            return {positions.data() + i * dim, static_cast<std::size_t>(dim)};
        }
        std::span<double> velocity(std::size_t i) noexcept
        {
            return {velocities.data() + i * dim, static_cast<std::size_t>(dim)};
        }
        std::span<const double> velocity(std::size_t i) const noexcept
        {
            return {velocities.data() + i * dim, static_cast<std::size_t>(dim)};
        }

        /// Moves every center along its velocity by dt and advances the clock.
        void advance(double dt) noexcept
        {
            for (std::size_t k = 0; k < positions.size(); ++k)
                positions[k] += velocities[k] * dt;
            t += dt;
        }

        /// |v|^2 summed over all balls (twice the kinetic energy).
        double energy() const noexcept { return norm2(velocities); }

        std::vector<double> momentum() const
        {
            std::vector<double> p(static_cast<std::size_t>(dim), 0.0);
            for (std::size_t i = 0; i < size(); ++i)
                for (int k = 0; k < dim; ++k)
                    p[k] += velocity(i)[k];
            return p;
        }

        /// |x(t)|: Euclidean norm of the stacked configuration vector.
        double configuration_norm() const noexcept { return norm(positions); }

        /// Smallest center distance over all pairs; +inf for fewer than two balls.
        double min_pair_distance() const noexcept
        {
            double best = infinity;
            for (std::size_t i = 0; i < size(); ++i)
                for (std::size_t j = i + 1; j < size(); ++j)
                    best = std::min(best, distance(position(i), position(j)));
            return best;
        }

        /// Throws if shapes are inconsistent or two balls overlap beyond tol::geom.
        void validate() const
        {
            if (dim < 1)
                throw parameter_error{"dimension must be positive"};
            if (positions.size() % static_cast<std::size_t>(dim) != 0 || positions.size() != velocities.size())
                throw parameter_error{"position/velocity arrays have inconsistent sizes"};
            if (size() == 0)
                throw parameter_error{"state has no balls"};
            if (min_pair_distance() < contact_distance - tol::geom)
                throw overlap_error{"initial state has overlapping balls"};
        }
    };

    /// Time reversal: negate velocities and the clock.
    inline SystemState reversed(SystemState s)
    {
        for (double &v : s.velocities)
            v = -v;
        s.t = -s.t;
        return s;
    }

    /// Copy of the listed balls, in the given order.
    inline SystemState restrict_to(const SystemState &s, std::span<const std::size_t> members)
    {
        SystemState r(s.dim, members.size(), s.t);
        for (std::size_t k = 0; k < members.size(); ++k)
        {
            auto x = s.position(members[k]);
            auto v = s.velocity(members[k]);
            std::copy(x.begin(), x.end(), r.position(k).begin());
            std::copy(v.begin(), v.end(), r.velocity(k).begin());
        }
        return r;
    }

    /// One elastic collision with i < j.
    struct CollisionEvent
    {
        double t = 0.0;
        std::size_t i = 0;
        std::size_t j = 0;
        std::vector<double> xi, xj;
        std::vector<double> vi_pre, vj_pre;
        std::vector<double> vi_post, vj_post;
    };

    enum class Termination
    {
        free_flight,
        horizon,
        budget
    };

    inline const char *to_string(Termination t) noexcept
    {
        switch (t)
        {
        case Termination::free_flight:
            return "free_flight";
        case Termination::horizon:
            return "horizon";
        case Termination::budget:
            return "budget";
        }
        return "?";
    }

    inline Termination termination_from_string(const std::string &s)
    {
        if (s == "free_flight")
            return Termination::free_flight;
        if (s == "horizon")
            return Termination::horizon;
        if (s == "budget")
            return Termination::budget;
        throw schema_error{"unknown termination '" + s + "'"};
    }

    inline constexpr int log_format_version = 1;

    struct LogHeader
    {
        std::uint64_t seed = 0;
        nlohmann::json scenario = nlohmann::json::object();
        std::optional<double> horizon;
    };

    /// Initial state plus the time-ordered collision list; a complete replayable trajectory.
    struct EventLog
    {
        LogHeader header;
        SystemState initial;
        std::vector<CollisionEvent> events;
        Termination terminated = Termination::free_flight;
        /// No collisions occur at any time before initial.t.
        bool past_free_flight = false;

        std::size_t size() const noexcept { return initial.size(); }
        int dim() const noexcept { return initial.dim; }

        bool future_certified() const noexcept { return terminated == Termination::free_flight; }
        bool both_tails_certified() const noexcept { return past_free_flight && future_certified(); }

        /// Ordered (i, j) pairs of all collisions.
        std::vector<std::pair<std::size_t, std::size_t>> pair_sequence() const
        {
            std::vector<std::pair<std::size_t, std::size_t>> seq;
            seq.reserve(events.size());
            for (const auto &e : events)
                seq.emplace_back(e.i, e.j);
            return seq;
        }
    };

} // namespace hardball
