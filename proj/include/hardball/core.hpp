#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hardball
{
    /// Numerical tolerances shared by the simulator and the analyzer.
    namespace tol
    {
        /// Two distinct pair collisions closer than this in time are simultaneous.
        inline constexpr double time = 1e-9;
        /// Contact and overlap slack on center distances.
        inline constexpr double geom = 1e-7;
        /// Relative slack for conservation checks.
        inline constexpr double num = 1e-9;
    } // namespace tol

    /// Ball radius is fixed at 1, so contact means center distance 2.
    inline constexpr double contact_distance = 2.0;

    inline constexpr double infinity = std::numeric_limits<double>::infinity();

    // Error hierarchy. Everything the library throws derives from hardball::error.
    struct error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct overlap_error : error
    {
        using error::error;
    };

    struct non_contact_error : error
    {
        using error::error;
    };

    struct non_approaching_error : error
    {
        using error::error;
    };

    /// Two distinct pairs reach contact within tol::time of each other.
    struct simultaneity_error : error
    {
        double t;
        simultaneity_error(const std::string &what, double at) : error(what), t(at) {}
    };

    struct budget_error : error
    {
        using error::error;
    };

    struct out_of_span_error : error
    {
        using error::error;
    };

    struct zero_energy_error : error
    {
        using error::error;
    };

    struct uncertified_tail_error : error
    {
        using error::error;
    };

    struct external_collision_error : error
    {
        using error::error;
    };

    struct degenerate_error : error
    {
        using error::error;
    };

    struct connected_graph_error : error
    {
        using error::error;
    };

    struct depth_error : error
    {
        using error::error;
    };

    struct coverage_error : error
    {
        using error::error;
    };

    struct parameter_error : std::invalid_argument
    {
        using std::invalid_argument::invalid_argument;
    };

    struct infeasible_packing_error : error
    {
        using error::error;
    };

    struct schema_error : error
    {
        using error::error;
    };

    // Small dense vector helpers over spans. Dimensions are runtime values.

    inline double dot(std::span<const double> a, std::span<const double> b) noexcept
    {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k)
            s += a[k] * b[k];
        return s;
    }

    inline double norm2(std::span<const double> a) noexcept { return dot(a, a); }

    inline double norm(std::span<const double> a) noexcept { return std::sqrt(norm2(a)); }

    inline std::vector<double> sub(std::span<const double> a, std::span<const double> b)
    {
        std::vector<double> r(a.size());
        for (std::size_t k = 0; k < a.size(); ++k)
            r[k] = a[k] - b[k];
        return r;
    }

    inline double distance(std::span<const double> a, std::span<const double> b) noexcept
    {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k)
        {
            const double dk = a[k] - b[k];
            s += dk * dk;
        }
        return std::sqrt(s);
    }

    /// Relative difference with an absolute floor of 1 on the scale.
    inline double rel_diff(double a, double b) noexcept
    {
        return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
    }

    /// Union-find over ball indices; used for collision-graph connectivity.
    class disjoint_sets
    {
    public:
        explicit disjoint_sets(std::size_t n) : parent_(n), size_(n, 1), components_(n)
        {
            for (std::size_t k = 0; k < n; ++k)
                parent_[k] = k;
        }

        std::size_t find(std::size_t a) noexcept
        {
            while (parent_[a] != a)
            {
                parent_[a] = parent_[parent_[a]];
                a = parent_[a];
            }
            return a;
        }

        bool unite(std::size_t a, std::size_t b) noexcept
        {
            a = find(a);
            b = find(b);
            if (a == b)
                return false;
            if (size_[a] < size_[b])
                std::swap(a, b);
            parent_[b] = a;
            size_[a] += size_[b];
            --components_;
            return true;
        }

        std::size_t components() const noexcept { return components_; }

    private:
        std::vector<std::size_t> parent_;
        std::vector<std::size_t> size_;
        std::size_t components_;
    };

} // namespace hardball
