#pragma once

#include "hardball/core.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace hardball
{
    enum class FormulaId
    {
        main_thm,
        bfk1,
        bfk5,
        lower,
        window,
        interval,
        tree_size,
        per_leaf,
        open_interval_total
    };

    inline const char *to_string(FormulaId f) noexcept
    {
        switch (f)
        {
        case FormulaId::main_thm:
            return "main_thm";
        case FormulaId::bfk1:
            return "bfk1";
        case FormulaId::bfk5:
            return "bfk5";
        case FormulaId::lower:
            return "lower";
        case FormulaId::window:
            return "window";
        case FormulaId::interval:
            return "interval";
        case FormulaId::tree_size:
            return "tree_size";
        case FormulaId::per_leaf:
            return "per_leaf";
        case FormulaId::open_interval_total:
            return "open_interval_total";
        }
        return "?";
    }

    /// A bound kept as its natural logarithm. Parameters not used by a formula stay at 1.
    struct LogBound
    {
        FormulaId formula = FormulaId::main_thm;
        long long n = 1;
        int d = 2;
        double mass_ratio = 1.0;
        double radius_ratio = 1.0;
        long long n_family = 1;
        double x_norm = 1.0;
        double ln_value = 0.0;

        double log10_value() const noexcept { return ln_value / std::log(10.0); }
    };

    namespace detail
    {
        inline void require_n(long long n)
        {
            if (n < 1)
                throw parameter_error{"bound: n must be at least 1"};
        }
        inline void require_d(int d)
        {
            if (d < 2)
                throw parameter_error{"bound: d must be at least 2"};
            if (d > 20)
                throw parameter_error{"bound: d above 20 is outside the supported range"};
        }
        inline void require_ratio(double r)
        {
            if (!(r >= 1.0) || !std::isfinite(r))
                throw parameter_error{"bound: ratios must be finite and at least 1"};
        }
        inline double pow5(int d) { return std::pow(5.0, d); }
    } // namespace detail

    /// 1600 (1000 * 32^(5^d))^n * n^(((3/2) 5^d + 9/2) n + 3/2)
    inline double ln_main_bound(long long n, int d)
    {
        detail::require_n(n);
        detail::require_d(d);
        const double N = static_cast<double>(n), q = detail::pow5(d);
        return std::log(1600.0) + N * (std::log(1000.0) + q * std::log(32.0)) + ((1.5 * q + 4.5) * N + 1.5) * std::log(N);
    }

    /// (32 sqrt(mass_ratio) radius_ratio n^(3/2))^(n^2)
    inline double ln_bfk1_bound(long long n, double mass_ratio = 1.0, double radius_ratio = 1.0)
    {
        detail::require_n(n);
        detail::require_ratio(mass_ratio);
        detail::require_ratio(radius_ratio);
        const double N = static_cast<double>(n);
        return N * N * (std::log(32.0) + 0.5 * std::log(mass_ratio) + std::log(radius_ratio) + 1.5 * std::log(N));
    }

    /// (400 mass_ratio n^2)^(2 n^4)
    inline double ln_bfk5_bound(long long n, double mass_ratio = 1.0)
    {
        detail::require_n(n);
        detail::require_ratio(mass_ratio);
        const double N = static_cast<double>(n);
        return 2.0 * N * N * N * N * (std::log(400.0) + std::log(mass_ratio) + 2.0 * std::log(N));
    }

    /// 2^floor(n/2)
    inline double ln_lower_bound(long long n)
    {
        detail::require_n(n);
        return static_cast<double>(n / 2) * std::log(2.0);
    }

    /// Collisions in a unit time window: (32 n^(3/2))^(5^d n - 2).
    inline double ln_window_bound(long long n, int d)
    {
        detail::require_n(n);
        detail::require_d(d);
        const double N = static_cast<double>(n);
        return (detail::pow5(d) * N - 2.0) * (std::log(32.0) + 1.5 * std::log(N));
    }

    /// Collisions of an isolated family on its core interval: 200 n_F^3 |x| (32 n_F^(3/2))^(5^d n_F - 2).
    inline double ln_interval_bound(long long n_family, int d, double x_norm)
    {
        detail::require_n(n_family);
        if (!(x_norm > 0.0) || !std::isfinite(x_norm))
            throw parameter_error{"ln_interval_bound: x_norm must be positive and finite"};
        return std::log(200.0) + 3.0 * std::log(static_cast<double>(n_family)) + std::log(x_norm) +
               ln_window_bound(n_family, d);
    }

    /// Leaf bound uniform in the family: 800 n^(9/2) (32 n^(3/2))^(5^d n - 2).
    inline double ln_per_leaf_bound(long long n, int d)
    {
        return std::log(800.0) + 4.5 * std::log(static_cast<double>(n)) + ln_window_bound(n, d);
    }

    /// Node count of the branching tree: 1000^n n^(9n/2).
    inline double ln_tree_size_bound(long long n)
    {
        detail::require_n(n);
        const double N = static_cast<double>(n);
        return N * std::log(1000.0) + 4.5 * N * std::log(N);
    }

    /// Offspring of one node with n_F balls: 1000 n_F^(9/2).
    inline double ln_offspring_bound(long long n_family)
    {
        detail::require_n(n_family);
        return std::log(1000.0) + 4.5 * std::log(static_cast<double>(n_family));
    }

    /// All collisions inside open leaf intervals: 800 * 1000^n n^((9/2)(n+1)) (32 n^(3/2))^(5^d n - 2).
    inline double ln_open_interval_total(long long n, int d)
    {
        const double N = static_cast<double>(n);
        return std::log(800.0) + N * std::log(1000.0) + 4.5 * (N + 1.0) * std::log(N) + ln_window_bound(n, d);
    }

    /// Evaluates b.formula on b's parameters and stores the result in b.ln_value.
    inline LogBound evaluate(LogBound b)
    {
        switch (b.formula)
        {
        case FormulaId::main_thm:
            b.ln_value = ln_main_bound(b.n, b.d);
            break;
        case FormulaId::bfk1:
            b.ln_value = ln_bfk1_bound(b.n, b.mass_ratio, b.radius_ratio);
            break;
        case FormulaId::bfk5:
            b.ln_value = ln_bfk5_bound(b.n, b.mass_ratio);
            break;
        case FormulaId::lower:
            b.ln_value = ln_lower_bound(b.n);
            break;
        case FormulaId::window:
            b.ln_value = ln_window_bound(b.n, b.d);
            break;
        case FormulaId::interval:
            b.ln_value = ln_interval_bound(b.n_family, b.d, b.x_norm);
            break;
        case FormulaId::tree_size:
            b.ln_value = ln_tree_size_bound(b.n);
            break;
        case FormulaId::per_leaf:
            b.ln_value = ln_per_leaf_bound(b.n, b.d);
            break;
        case FormulaId::open_interval_total:
            b.ln_value = ln_open_interval_total(b.n, b.d);
            break;
        }
        return b;
    }

    struct BoundRow
    {
        long long n;
        double ln_lower;
        double ln_main;
        double ln_bfk1;
    };

    struct BoundComparison
    {
        int d = 3;
        std::vector<BoundRow> rows;
        /// Smallest sampled n from which ln K- < ln K+ < ln K+' holds at every larger sample.
        std::optional<long long> crossover;
        double c2 = 0.0;       // max ln K+ / (n ln n), n >= 2
        double c3_lower = 0.0; // min ln K+' / (n^2 ln n), n >= 2
        bool ordering_holds_beyond_crossover = false;
    };

    /// Tabulates the lower bound, the main bound and the n^2-exponent bound over `ns`.
    inline BoundComparison compare_bounds(const std::vector<long long> &ns, int d)
    {
        detail::require_d(d);
        BoundComparison c;
        c.d = d;
        c.c3_lower = infinity;
        for (auto n : ns)
        {
            BoundRow r{n, ln_lower_bound(n), ln_main_bound(n, d), ln_bfk1_bound(n)};
            c.rows.push_back(r);
            if (n >= 2)
            {
                const double nl = static_cast<double>(n) * std::log(static_cast<double>(n));
                c.c2 = std::max(c.c2, r.ln_main / nl);
                c.c3_lower = std::min(c.c3_lower, r.ln_bfk1 / (static_cast<double>(n) * nl));
            }
        }
        auto ordered = [](const BoundRow &r) { return r.ln_lower < r.ln_main && r.ln_main < r.ln_bfk1; };
        std::size_t k = c.rows.size();
        while (k > 0 && ordered(c.rows[k - 1]))
            --k;
        if (k < c.rows.size())
        {
            c.crossover = c.rows[k].n;
            c.ordering_holds_beyond_crossover = true;
        }
        return c;
    }

    /// Smallest integer n0 in [1, n_max] with ln K- < ln K+ < ln K+' for every n in [n0, n_max].
    inline std::optional<long long> exact_crossover(int d, long long n_max)
    {
        long long last_bad = 0;
        for (long long n = 1; n <= n_max; ++n)
        {
            const double m = ln_main_bound(n, d);
            if (!(ln_lower_bound(n) < m && m < ln_bfk1_bound(n)))
                last_bad = n;
        }
        if (last_bad == n_max)
            return std::nullopt;
        return last_bad + 1;
    }

    /// n = lo, then roughly `per_decade` log-spaced integers per decade up to hi.
    inline std::vector<long long> log_sweep(long long lo, long long hi, int per_decade = 20)
    {
        std::vector<long long> ns;
        double x = static_cast<double>(lo);
        const double step = std::pow(10.0, 1.0 / per_decade);
        while (x <= static_cast<double>(hi) + 0.5)
        {
            const auto n = static_cast<long long>(std::llround(x));
            if (ns.empty() || n > ns.back())
                ns.push_back(n);
            x *= step;
        }
        if (ns.back() != hi)
            ns.push_back(hi);
        return ns;
    }

} // namespace hardball
