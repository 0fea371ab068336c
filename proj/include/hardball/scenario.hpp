#pragma once

#include "hardball/dynamics.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace hardball
{
    inline constexpr const char *rng_algorithm = "mt19937_64/u53+box_muller";

    enum class ScenarioKind
    {
        random_box,
        line_chain,
        converging_cluster,
        two_cluster
    };

    inline const char *to_string(ScenarioKind k) noexcept
    {
        switch (k)
        {
        case ScenarioKind::random_box:
            return "random_box";
        case ScenarioKind::line_chain:
            return "line_chain";
        case ScenarioKind::converging_cluster:
            return "converging_cluster";
        case ScenarioKind::two_cluster:
            return "two_cluster";
        }
        return "?";
    }

    inline ScenarioKind scenario_kind_from_string(const std::string &s)
    {
        for (auto k : {ScenarioKind::random_box, ScenarioKind::line_chain, ScenarioKind::converging_cluster,
                       ScenarioKind::two_cluster})
            if (s == to_string(k))
                return k;
        throw schema_error{"unknown scenario kind '" + s + "'"};
    }

    /// Initial-condition recipe. Geometry fields left unset take kind-specific defaults.
    struct ScenarioSpec
    {
        ScenarioKind kind = ScenarioKind::random_box;
        std::size_t n = 3;
        int d = 2;
        std::uint64_t seed = 0;
        std::optional<double> box;     // random_box, converging_cluster: cube side
        std::optional<double> spacing; // line_chain: center spacing
        std::optional<double> jitter;  // line_chain: max center offset
        std::optional<double> gap;     // two_cluster: distance between cluster centers
        double speed = 1.0;
        double clearance = 1e-3;
        std::size_t max_attempts = 200;
        std::size_t screen_max_events = 100'000;
        /// Literal initial state; bypasses sampling but not validation.
        std::optional<std::vector<std::vector<double>>> positions;
        std::optional<std::vector<std::vector<double>>> velocities;
    };

    namespace detail
    {
        template <class T>
        T get_field(const nlohmann::json &j, const char *key)
        {
            try
            {
                return j.at(key).get<T>();
            }
            catch (const nlohmann::json::exception &)
            {
                throw schema_error{std::string{"scenario field '"} + key + "' has the wrong type"};
            }
        }

        inline const std::set<std::string> &scenario_keys()
        {
            static const std::set<std::string> keys{"kind",    "n",         "d",           "seed",
                                                     "box",     "spacing",   "jitter",      "gap",
                                                     "speed",   "clearance", "max_attempts", "screen_max_events",
                                                     "positions", "velocities", "rng"};
            return keys;
        }
    } // namespace detail

    inline nlohmann::json to_json(const ScenarioSpec &s)
    {
        nlohmann::json j;
        j["kind"] = to_string(s.kind);
        j["n"] = s.n;
        j["d"] = s.d;
        j["seed"] = s.seed;
        if (s.box)
            j["box"] = *s.box;
        if (s.spacing)
            j["spacing"] = *s.spacing;
        if (s.jitter)
            j["jitter"] = *s.jitter;
        if (s.gap)
            j["gap"] = *s.gap;
        j["speed"] = s.speed;
        j["clearance"] = s.clearance;
        j["max_attempts"] = s.max_attempts;
        j["screen_max_events"] = s.screen_max_events;
        if (s.positions)
            j["positions"] = *s.positions;
        if (s.velocities)
            j["velocities"] = *s.velocities;
        j["rng"] = rng_algorithm;
        return j;
    }

    /// Strict parse: unknown keys, wrong types and out-of-range values raise schema_error.
    inline ScenarioSpec scenario_from_json(const nlohmann::json &j)
    {
        if (!j.is_object())
            throw schema_error{"scenario must be a JSON object"};
        for (const auto &[key, _] : j.items())
            if (!detail::scenario_keys().count(key))
                throw schema_error{"unknown scenario field '" + key + "'"};
        ScenarioSpec s;
        if (!j.contains("kind") || !j.contains("n") || !j.contains("d") || !j.contains("seed"))
            throw schema_error{"scenario requires kind, n, d and seed"};
        s.kind = scenario_kind_from_string(detail::get_field<std::string>(j, "kind"));
        const auto n = detail::get_field<long long>(j, "n");
        const auto d = detail::get_field<long long>(j, "d");
        if (n < 1 || n > 10'000)
            throw schema_error{"scenario n must be in [1, 10000]"};
        if (d < 1 || d > 10)
            throw schema_error{"scenario d must be in [1, 10]"};
        s.n = static_cast<std::size_t>(n);
        s.d = static_cast<int>(d);
        if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
            throw schema_error{"scenario seed must be a nonnegative integer"};
        s.seed = j.at("seed").get<std::uint64_t>();
        auto positive = [&](const char *key, std::optional<double> &out) {
            if (!j.contains(key))
                return;
            const double v = detail::get_field<double>(j, key);
            if (!(v >= 0.0) || !std::isfinite(v))
                throw schema_error{std::string{"scenario field '"} + key + "' must be finite and nonnegative"};
            out = v;
        };
        positive("box", s.box);
        positive("spacing", s.spacing);
        positive("jitter", s.jitter);
        positive("gap", s.gap);
        if (j.contains("speed"))
        {
            s.speed = detail::get_field<double>(j, "speed");
            if (!(s.speed > 0.0) || !std::isfinite(s.speed))
                throw schema_error{"scenario speed must be positive"};
        }
        if (j.contains("clearance"))
        {
            s.clearance = detail::get_field<double>(j, "clearance");
            if (!(s.clearance >= 0.0))
                throw schema_error{"scenario clearance must be nonnegative"};
        }
        if (j.contains("max_attempts"))
            s.max_attempts = detail::get_field<std::size_t>(j, "max_attempts");
        if (j.contains("screen_max_events"))
            s.screen_max_events = detail::get_field<std::size_t>(j, "screen_max_events");
        if (j.contains("rng") && detail::get_field<std::string>(j, "rng") != rng_algorithm)
            throw schema_error{"scenario rng must be '" + std::string{rng_algorithm} + "'"};
        auto rows = [&](const char *key, std::optional<std::vector<std::vector<double>>> &out) {
            if (!j.contains(key))
                return;
            auto r = detail::get_field<std::vector<std::vector<double>>>(j, key);
            if (r.size() != s.n)
                throw schema_error{std::string{"scenario '"} + key + "' must have n rows"};
            for (const auto &row : r)
                if (row.size() != static_cast<std::size_t>(s.d))
                    throw schema_error{std::string{"scenario '"} + key + "' rows must have length d"};
            out = std::move(r);
        };
        rows("positions", s.positions);
        rows("velocities", s.velocities);
        if (s.positions.has_value() != s.velocities.has_value())
            throw schema_error{"scenario positions and velocities must be given together"};
        if (s.kind == ScenarioKind::two_cluster && s.d < 2 && !s.positions)
            throw schema_error{"two_cluster needs d >= 2"};
        return s;
    }

    /// Portable sampling on top of mt19937_64: the standard distributions are not specified
    /// bit-for-bit across library implementations, so uniforms and normals are derived here.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed) : eng_(seed) {}

        /// Uniform on [0, 1) with 53 random bits.
        double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

        double normal()
        {
            if (cached_)
            {
                cached_ = false;
                return spare_;
            }
            double u1 = uniform();
            while (u1 <= 0.0)
                u1 = uniform();
            const double u2 = uniform();
            const double r = std::sqrt(-2.0 * std::log(u1));
            spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
            cached_ = true;
            return r * std::cos(2.0 * std::numbers::pi * u2);
        }

    private:
        std::mt19937_64 eng_;
        double spare_ = 0.0;
        bool cached_ = false;
    };

    namespace detail
    {
        inline double default_box(const ScenarioSpec &s)
        {
            return 4.0 * std::ceil(std::pow(static_cast<double>(s.n), 1.0 / s.d)) + 2.0;
        }

        /// Places `count` centers uniformly in [lo, lo+side]^d with pairwise distance at least
        /// 2 + clearance against everything already in `x`.
        inline bool place_uniform(Rng &rng, std::vector<std::vector<double>> &x, std::size_t count, int d,
                                  std::span<const double> lo, double side, double clearance)
        {
            const double need = contact_distance + clearance;
            for (std::size_t b = 0; b < count; ++b)
            {
                bool placed = false;
                for (int attempt = 0; attempt < 2000 && !placed; ++attempt)
                {
                    std::vector<double> p(d);
                    for (int k = 0; k < d; ++k)
                        p[k] = lo[k] + rng.uniform(0.0, side);
                    placed = std::all_of(x.begin(), x.end(), [&](const auto &q) { return distance(p, q) >= need; });
                    if (placed)
                        x.push_back(std::move(p));
                }
                if (!placed)
                    return false;
            }
            return true;
        }

        inline std::vector<double> gaussian(Rng &rng, int d, double scale)
        {
            std::vector<double> v(d);
            for (auto &c : v)
                c = scale * rng.normal();
            return v;
        }

        /// Velocities pointing at the cluster centroid plus noise.
        inline void converging_velocities(Rng &rng, const std::vector<std::vector<double>> &x, std::size_t from,
                                          std::size_t to, int d, double speed, std::vector<std::vector<double>> &v)
        {
            std::vector<double> c(d, 0.0);
            for (std::size_t b = from; b < to; ++b)
                for (int k = 0; k < d; ++k)
                    c[k] += x[b][k] / static_cast<double>(to - from);
            for (std::size_t b = from; b < to; ++b)
            {
                auto w = sub(c, x[b]);
                const double len = norm(w);
                auto noise = gaussian(rng, d, 0.3 * speed);
                std::vector<double> u(d);
                for (int k = 0; k < d; ++k)
                    u[k] = (len > 0.0 ? speed * w[k] / len : 0.0) + noise[k];
                v[b] = u;
            }
        }

        inline std::optional<SystemState> sample(const ScenarioSpec &s, Rng &rng)
        {
            const int d = s.d;
            const std::size_t n = s.n;
            std::vector<std::vector<double>> x, v(n, std::vector<double>(d, 0.0));
            switch (s.kind)
            {
            case ScenarioKind::random_box:
            {
                const double side = s.box.value_or(default_box(s));
                const std::vector<double> lo(d, 0.0);
                if (!place_uniform(rng, x, n, d, lo, side, s.clearance))
                    return std::nullopt;
                for (auto &u : v)
                    u = gaussian(rng, d, s.speed);
                break;
            }
            case ScenarioKind::converging_cluster:
            {
                const double side = s.box.value_or(default_box(s));
                const std::vector<double> lo(d, -side / 2.0);
                if (!place_uniform(rng, x, n, d, lo, side, s.clearance))
                    return std::nullopt;
                converging_velocities(rng, x, 0, n, d, s.speed, v);
                break;
            }
            case ScenarioKind::line_chain:
            {
                const double spacing = s.spacing.value_or(4.0);
                const double jitter = s.jitter.value_or(0.5);
                if (spacing - 2.0 * jitter < contact_distance + s.clearance)
                    throw infeasible_packing_error{"line_chain: spacing - 2*jitter leaves no clearance"};
                for (std::size_t b = 0; b < n; ++b)
                {
                    std::vector<double> p(d, 0.0);
                    p[0] = (static_cast<double>(b) - static_cast<double>(n - 1) / 2.0) * spacing +
                           (jitter > 0.0 ? rng.uniform(-jitter, jitter) : 0.0);
                    x.push_back(std::move(p));
                }
                std::set<double> seen;
                for (auto &u : v)
                {
                    double c = rng.uniform(-s.speed, s.speed);
                    while (seen.count(c))
                        c = rng.uniform(-s.speed, s.speed);
                    seen.insert(c);
                    u[0] = c;
                }
                break;
            }
            case ScenarioKind::two_cluster:
            {
                // Clusters sit at -gap/2 and +gap/2 on axis 0 and drift apart along axis 1.
                // Internal speed relative to each cluster's center of mass stays below 0.5
                // forever (energy is conserved inside a cluster), which keeps cross pairs
                // apart for all time when 0.866 * gap exceeds the cluster diameter plus 2.
                const std::size_t na = (n + 1) / 2, nb = n - na;
                const double gap = s.gap.value_or(100.0);
                const double side = s.box.value_or(detail::default_box(s));
                if (0.8 * gap < contact_distance + 2.0 * side * std::sqrt(static_cast<double>(d)))
                    throw infeasible_packing_error{"two_cluster: gap too small for the cluster size"};
                for (std::size_t c = 0; c < 2; ++c)
                {
                    std::vector<double> lo(d, -side / 2.0);
                    lo[0] += (c == 0 ? -gap / 2.0 : gap / 2.0);
                    if (!place_uniform(rng, x, c == 0 ? na : nb, d, lo, side, s.clearance))
                        return std::nullopt;
                }
                converging_velocities(rng, x, 0, na, d, 1.0, v);
                converging_velocities(rng, x, na, n, d, 1.0, v);
                for (std::size_t c = 0; c < 2; ++c)
                {
                    const std::size_t from = c == 0 ? 0 : na, to = c == 0 ? na : n;
                    if (to == from)
                        continue;
                    std::vector<double> m(d, 0.0);
                    for (std::size_t b = from; b < to; ++b)
                        for (int k = 0; k < d; ++k)
                            m[k] += v[b][k] / static_cast<double>(to - from);
                    double internal = 0.0;
                    for (std::size_t b = from; b < to; ++b)
                        for (int k = 0; k < d; ++k)
                            internal += std::pow(v[b][k] - m[k], 2);
                    const double scale = internal > 0.0 ? 0.5 / std::sqrt(internal) : 0.0;
                    for (std::size_t b = from; b < to; ++b)
                    {
                        for (int k = 0; k < d; ++k)
                            v[b][k] = (v[b][k] - m[k]) * scale * s.speed;
                        v[b][1] += (c == 0 ? -1.0 : 1.0) * s.speed;
                    }
                }
                break;
            }
            }
            SystemState st(d, n, 0.0);
            for (std::size_t b = 0; b < n; ++b)
            {
                std::copy(x[b].begin(), x[b].end(), st.position(b).begin());
                std::copy(v[b].begin(), v[b].end(), st.velocity(b).begin());
            }
            return st;
        }

        inline SystemState literal_state(const ScenarioSpec &s)
        {
            SystemState st(s.d, s.n, 0.0);
            for (std::size_t b = 0; b < s.n; ++b)
            {
                std::copy((*s.positions)[b].begin(), (*s.positions)[b].end(), st.position(b).begin());
                std::copy((*s.velocities)[b].begin(), (*s.velocities)[b].end(), st.velocity(b).begin());
            }
            st.validate();
            return st;
        }
    } // namespace detail

    /// Deterministic initial state for `spec`. Samples that overlap, have zero kinetic energy
    /// in the center-of-mass frame, or run into a near-simultaneous collision anywhere on the
    /// complete trajectory are rejected and redrawn from the same stream.
    inline SystemState generate(const ScenarioSpec &spec)
    {
        if (spec.positions)
            return detail::literal_state(spec);
        Rng rng(spec.seed);
        SimulateOptions screen;
        screen.max_events = spec.screen_max_events;
        for (std::size_t attempt = 0; attempt < spec.max_attempts; ++attempt)
        {
            auto st = detail::sample(spec, rng);
            if (!st)
                continue;
            if (st->min_pair_distance() < contact_distance + spec.clearance * (1.0 - 1e-12))
                continue;
            const auto vbar = st->momentum();
            double internal = 0.0;
            for (std::size_t b = 0; b < st->size(); ++b)
                for (int k = 0; k < st->dim; ++k)
                    internal += std::pow(st->velocity(b)[k] - vbar[k] / static_cast<double>(st->size()), 2);
            if (spec.n > 1 && !(internal > 0.0))
                continue;
            try
            {
                const EventLog log = complete_log(*st, screen);
                if (log.terminated == Termination::budget)
                    continue;
            }
            catch (const simultaneity_error &)
            {
                continue;
            }
            catch (const budget_error &)
            {
                continue;
            }
            return *st;
        }
        throw infeasible_packing_error{"generate: no valid sample after " + std::to_string(spec.max_attempts) +
                                       " attempts"};
    }

} // namespace hardball
