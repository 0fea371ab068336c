#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace hardball;
using hardball::testing::make_state;

namespace
{
    /// Earliest contact time by bisection on |w + t u| - 2, independent of the closed form.
    std::optional<double> contact_by_bisection(std::vector<double> w, std::vector<double> u, double t_max)
    {
        auto gap = [&](double t) {
            double q = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k)
                q += std::pow(w[k] + t * u[k], 2);
            return std::sqrt(q) - 2.0;
        };
        // Closest approach time bounds the first root.
        const double uu = dot(u, u);
        if (uu == 0.0)
            return std::nullopt;
        const double t_close = -dot(w, u) / uu;
        if (t_close <= 0.0 || gap(t_close) >= 0.0)
            return std::nullopt;
        double lo = 0.0, hi = std::min(t_close, t_max);
        for (int it = 0; it < 200; ++it)
        {
            const double mid = (lo + hi) / 2.0;
            (gap(mid) > 0.0 ? lo : hi) = mid;
        }
        return (lo + hi) / 2.0;
    }
} // namespace

TEST(PairCollisionTime, HeadOnExample)
{
    const std::vector<double> w{6, 0}, u{-2, 0};
    auto t = pair_collision_time(w, u);
    ASSERT_TRUE(t);
    EXPECT_NEAR(*t, 2.0, 1e-15);
}

TEST(PairCollisionTime, RecedingAndMissing)
{
    EXPECT_FALSE(pair_collision_time(std::vector<double>{4, 0}, std::vector<double>{1, 0}));
    EXPECT_FALSE(pair_collision_time(std::vector<double>{6, 3}, std::vector<double>{-2, 0}));
}

TEST(PairCollisionTime, GrazingIsNotACollision)
{
    // Offset exactly 2 perpendicular to the motion: tangent contact, zero discriminant.
    EXPECT_FALSE(pair_collision_time(std::vector<double>{6, 2}, std::vector<double>{-1, 0}));
}

TEST(PairCollisionTime, OverlapThrows)
{
    EXPECT_THROW(pair_collision_time(std::vector<double>{1, 0}, std::vector<double>{-1, 0}), overlap_error);
}

TEST(PairCollisionTime, MatchesBisectionOracle)
{
    Rng rng(99);
    int hits = 0;
    for (int k = 0; k < 2000; ++k)
    {
        std::vector<double> w(3), u(3);
        for (auto &c : w)
            c = rng.uniform(-8, 8);
        for (auto &c : u)
            c = rng.uniform(-2, 2);
        // Half the draws aim roughly at the partner so both branches are exercised.
        if (k % 2 == 0)
            for (std::size_t a = 0; a < 3; ++a)
                u[a] -= 0.5 * w[a];
        if (norm(w) < 2.01)
            continue;
        const auto t = pair_collision_time(w, u);
        const auto oracle = contact_by_bisection(w, u, 1e9);
        ASSERT_EQ(t.has_value(), oracle.has_value()) << k;
        if (t)
        {
            ++hits;
            EXPECT_NEAR(*t, *oracle, 1e-9 * std::max(1.0, *oracle));
        }
    }
    EXPECT_GT(hits, 100);
}

TEST(ApplyCollision, HeadOnExchange)
{
    auto s = make_state({{0, 0}, {2, 0}}, {{1, 0}, {-1, 0}});
    apply_collision_in_place(s, 0, 1);
    EXPECT_EQ(s.velocity(0)[0], -1.0);
    EXPECT_EQ(s.velocity(1)[0], 1.0);
}

TEST(ApplyCollision, ObliqueExample)
{
    auto s = make_state({{2, 0}, {0, 0}}, {{-1, 1}, {0, 0}});
    apply_collision_in_place(s, 0, 1);
    EXPECT_NEAR(s.velocity(0)[0], 0.0, 1e-15);
    EXPECT_NEAR(s.velocity(0)[1], 1.0, 1e-15);
    EXPECT_NEAR(s.velocity(1)[0], -1.0, 1e-15);
    EXPECT_NEAR(s.velocity(1)[1], 0.0, 1e-15);
}

TEST(ApplyCollision, RejectsNonContactAndReceding)
{
    auto far = make_state({{0, 0}, {3, 0}}, {{1, 0}, {-1, 0}});
    EXPECT_THROW(apply_collision_in_place(far, 0, 1), non_contact_error);
    auto receding = make_state({{0, 0}, {2, 0}}, {{-1, 0}, {1, 0}});
    EXPECT_THROW(apply_collision_in_place(receding, 0, 1), non_approaching_error);
}

TEST(ApplyCollision, ConservesEnergyAndMomentumRandomly)
{
    Rng rng(5);
    for (int k = 0; k < 500; ++k)
    {
        const int d = 2 + k % 3;
        SystemState s(d, 2);
        std::vector<double> n(d);
        for (auto &c : n)
            c = rng.normal();
        const double len = norm(n);
        for (int a = 0; a < d; ++a)
        {
            s.position(1)[a] = 2.0 * n[a] / len;
            s.velocity(0)[a] = rng.normal();
            s.velocity(1)[a] = rng.normal();
        }
        // Ensure approach: relative velocity along x0 - x1 must be negative.
        if (dot(sub(s.velocity(0), s.velocity(1)), sub(s.position(0), s.position(1))) >= 0)
            std::swap_ranges(s.velocity(0).begin(), s.velocity(0).end(), s.velocity(1).begin());
        if (dot(sub(s.velocity(0), s.velocity(1)), sub(s.position(0), s.position(1))) >= 0)
            continue;
        const double e0 = s.energy();
        const auto p0 = s.momentum();
        apply_collision_in_place(s, 0, 1);
        EXPECT_NEAR(s.energy(), e0, 1e-12 * e0);
        for (int a = 0; a < d; ++a)
            EXPECT_NEAR(s.momentum()[a], p0[a], 1e-12);
    }
}

TEST(NextEvent, SingleApproachingPairAndFreeFlight)
{
    auto s = make_state({{0, 0}, {5, 0}, {0, 20}}, {{1, 0}, {0, 0}, {0, 1}});
    auto e = next_event(s);
    ASSERT_TRUE(e);
    EXPECT_EQ(e->i, 0u);
    EXPECT_EQ(e->j, 1u);
    EXPECT_NEAR(e->t, 3.0, 1e-12);

    auto apart = make_state({{0, 0}, {5, 0}}, {{-1, 0}, {1, 0}});
    EXPECT_FALSE(next_event(apart));
}

TEST(NextEvent, SimultaneityIsRejected)
{
    auto s = make_state({{-6, 0}, {0, 0}, {6, 0}}, {{1, 0}, {0, 0}, {-1, 0}});
    try
    {
        next_event(s);
        FAIL() << "expected simultaneity_error";
    }
    catch (const simultaneity_error &e)
    {
        EXPECT_NEAR(e.t, 4.0, 1e-12);
    }
}

TEST(Simulate, TwoBallsHeadOn)
{
    auto s = make_state({{0, 0}, {6, 0}}, {{1, 0}, {-1, 0}});
    auto log = simulate(s);
    ASSERT_EQ(log.events.size(), 1u);
    EXPECT_EQ(log.terminated, Termination::free_flight);
    EXPECT_NEAR(log.events[0].t, 2.0, 1e-12);
}

TEST(Simulate, ThreeOnALineCrossEveryPair)
{
    // Spacing breaks the exact triple-contact symmetry; each pair of lines crosses once.
    auto s = make_state({{-6, 0}, {0, 0}, {6.5, 0}}, {{1, 0}, {0, 0}, {-1, 0}});
    auto log = simulate(s);
    EXPECT_EQ(log.events.size(), 3u);
    EXPECT_EQ(log.terminated, Termination::free_flight);
}

TEST(Simulate, LiteralSymmetricLineIsSimultaneous)
{
    auto s = make_state({{-6, 0}, {0, 0}, {6, 0}}, {{1, 0}, {0, 0}, {-1, 0}});
    EXPECT_THROW(simulate(s), simultaneity_error);
}

TEST(Simulate, HorizonAndBudgetAreDistinct)
{
    auto s = make_state({{0, 0}, {6, 0}, {30, 0}}, {{1, 0}, {-1, 0}, {-1, 0}});
    SimulateOptions h;
    h.horizon = 1.0;
    EXPECT_EQ(simulate(s, h).terminated, Termination::horizon);
    SimulateOptions b;
    b.max_events = 1;
    auto log = simulate(s, b);
    EXPECT_EQ(log.terminated, Termination::budget);
    EXPECT_EQ(log.events.size(), 1u);
}

TEST(Simulate, OneDimensionalCountIsAtMostPairs)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        auto sp = hardball::testing::spec(ScenarioKind::line_chain, 3 + seed % 6, 2, seed);
        const auto state = generate(sp);
        const auto log = simulate(state);
        EXPECT_LE(log.events.size(), sp.n * (sp.n - 1) / 2);
    }
}

TEST(Simulate, CachedSchedulerMatchesFullScan)
{
    for (auto kind : hardball::testing::all_kinds)
        for (std::uint64_t seed = 0; seed < 8; ++seed)
        {
            const auto sp = hardball::testing::spec(kind, 7, 2 + seed % 2, seed);
            const auto log = complete_log(generate(sp));
            // Step the exhaustive scheduler independently and compare every event.
            SystemState s = log.initial;
            for (const auto &e : log.events)
            {
                auto next = next_event(s);
                ASSERT_TRUE(next);
                EXPECT_EQ(next->i, e.i);
                EXPECT_EQ(next->j, e.j);
                EXPECT_NEAR(next->t, e.t, 1e-9 * std::max(1.0, std::abs(e.t)));
                s.advance(e.t - s.t);
                s.t = e.t;
                apply_collision_in_place(s, e.i, e.j);
            }
            EXPECT_FALSE(next_event(s));
        }
}

TEST(Simulate, DeterministicBitIdentical)
{
    const auto sp = hardball::testing::spec(ScenarioKind::converging_cluster, 8, 3, 11);
    const auto a = complete_log(generate(sp));
    const auto b = complete_log(generate(sp));
    EXPECT_EQ(log_to_string(a), log_to_string(b));
}

TEST(StateAt, ExamplesAndSpan)
{
    auto s = make_state({{0, 0}, {6, 0}}, {{1, 0}, {-1, 0}});
    auto log = simulate(s);
    Trajectory traj(log);
    const auto at0 = traj.state_at(0.0);
    EXPECT_EQ(at0.positions, s.positions);
    const auto mid = traj.state_at(1.0);
    EXPECT_DOUBLE_EQ(mid.position(0)[0], 1.0);
    // Right-continuous velocities at the event.
    const auto at_event = traj.state_at(2.0);
    EXPECT_DOUBLE_EQ(at_event.velocity(0)[0], -1.0);
    // Free-flight tail: extrapolation never overlaps.
    const auto late = traj.state_at(1e6);
    EXPECT_GE(late.min_pair_distance(), 2.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = i + 1; j < 2; ++j)
            EXPECT_FALSE(pair_collision_time(late, i, j));

    SimulateOptions h;
    h.horizon = 1.0;
    auto partial = simulate(make_state({{0, 0}, {6, 0}}, {{1, 0}, {-1, 0}}), h);
    EXPECT_THROW(Trajectory(partial).state_at(5.0), out_of_span_error);
}

TEST(StateAt, PiecewiseLinearBetweenEvents)
{
    const auto log = complete_log(generate(hardball::testing::spec(ScenarioKind::random_box, 6, 2, 3)));
    Trajectory traj(log);
    for (std::size_t k = 0; k + 1 < log.events.size(); ++k)
    {
        const double a = log.events[k].t, b = log.events[k + 1].t;
        const double t = a + 0.37 * (b - a);
        SystemState expect = traj.snapshot(k + 1);
        expect.advance(t - a);
        const auto got = traj.state_at(t);
        for (std::size_t q = 0; q < got.positions.size(); ++q)
            EXPECT_NEAR(got.positions[q], expect.positions[q], 1e-12);
    }
}

TEST(MinGap, Examples)
{
    auto head_on = simulate(make_state({{0, 0}, {6, 0}}, {{1, 0}, {-1, 0}}));
    EXPECT_NEAR(min_gap(head_on, 100), 2.0, 1e-12);
    auto receding = simulate(make_state({{0, 0}, {7, 0}}, {{-1, 0}, {1, 0}}));
    EXPECT_DOUBLE_EQ(min_gap(receding, 10), 7.0);
}

TEST(MinGap, DenseSamplingOracle)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed)
    {
        const auto log = complete_log(generate(hardball::testing::spec(ScenarioKind::converging_cluster, 8, 2, seed)));
        const double coarse = min_gap(log, 100);
        const double dense = min_gap(log, 1000);
        EXPECT_GE(coarse, 2.0 - tol::geom);
        EXPECT_GE(dense, 2.0 - tol::geom);
        EXPECT_LE(dense, coarse);
    }
}

TEST(TimeReversal, ReplaysEventsBackward)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed)
    {
        const auto log = complete_log(generate(hardball::testing::spec(ScenarioKind::converging_cluster, 6, 3, seed)));
        EXPECT_LE(time_reversal_error(log), 1e-8) << seed;
    }
}

TEST(CompleteLog, BothTailsCertified)
{
    for (auto kind : hardball::testing::all_kinds)
    {
        const auto log = complete_log(generate(hardball::testing::spec(kind, 5, 2, 2)));
        EXPECT_TRUE(log.both_tails_certified());
        EXPECT_FALSE(next_event(reversed(log.initial)));
    }
}
