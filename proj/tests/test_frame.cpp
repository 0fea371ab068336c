#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hardball;
using hardball::testing::make_state;

namespace
{
    EventLog seeded(ScenarioKind k, std::size_t n, int d, std::uint64_t seed)
    {
        return hardball::testing::complete_run(hardball::testing::spec(k, n, d, seed));
    }

    /// Dense sampling of |x(t)| over a window covering every event; independent of the
    /// per-piece vertex formula.
    double sampled_min_norm(const EventLog &log, double *argmin)
    {
        Trajectory traj(log);
        const double a = log.events.empty() ? log.initial.t : log.events.front().t;
        const double b = traj.last_time();
        const double pad = 50.0 + (b - a);
        const double lo = a - pad, hi = b + pad;
        const int samples = 200000;
        double best = infinity;
        for (int k = 0; k <= samples; ++k)
        {
            const double t = lo + (hi - lo) * k / samples;
            const double x = traj.state_at(t).configuration_norm();
            if (x < best)
            {
                best = x;
                *argmin = t;
            }
        }
        return best;
    }
} // namespace

TEST(Normalize, AlreadyNormalizedIsIdentity)
{
    const auto once = normalize(seeded(ScenarioKind::random_box, 6, 2, 4)).first;
    const auto [twice, rep] = normalize(once);
    for (double z : rep.momentum_shift)
        EXPECT_NEAR(z, 0.0, 1e-12);
    EXPECT_NEAR(rep.speed_scale, 1.0, 1e-12);
    ASSERT_EQ(twice.events.size(), once.events.size());
    for (std::size_t k = 0; k < once.events.size(); ++k)
        EXPECT_NEAR(twice.events[k].t, once.events[k].t, 1e-9 * std::max(1.0, std::abs(once.events[k].t)));
}

TEST(Normalize, FrameAssumptionsHold)
{
    for (auto kind : hardball::testing::all_kinds)
    {
        const auto [log, rep] = normalize(seeded(kind, 7, 3, 8));
        EXPECT_NEAR(log.initial.energy(), 1.0, 1e-12);
        for (double p : log.initial.momentum())
            EXPECT_NEAR(p, 0.0, 1e-12);
        for (double c : detail::mean_rows(log.initial.positions, log.size(), log.dim()))
            EXPECT_NEAR(c, 0.0, 1e-9);
        EXPECT_TRUE(log.both_tails_certified());
    }
}

TEST(Normalize, ConstantVelocityShiftIsRemoved)
{
    const auto base = seeded(ScenarioKind::converging_cluster, 6, 2, 3);
    SystemState shifted = base.initial;
    const std::vector<double> w{0.7, -1.3};
    for (std::size_t i = 0; i < shifted.size(); ++i)
        for (int a = 0; a < 2; ++a)
            shifted.velocity(i)[a] += w[a];
    const auto moved = complete_log(shifted);
    EXPECT_EQ(moved.pair_sequence(), base.pair_sequence());
    const auto [a, ra] = normalize(base);
    const auto [b, rb] = normalize(moved);
    for (int k = 0; k < 2; ++k)
        EXPECT_NEAR(rb.momentum_shift[k] - ra.momentum_shift[k], w[k], 1e-12);
    EXPECT_EQ(a.pair_sequence(), b.pair_sequence());
}

TEST(Normalize, DoubledVelocitiesHalveTimeSpans)
{
    const auto base = seeded(ScenarioKind::converging_cluster, 5, 2, 12);
    SystemState fast = base.initial;
    for (double &v : fast.velocities)
        v *= 2.0;
    fast.t = 0.0;
    SystemState slow = base.initial;
    slow.t = 0.0;
    const auto ls = simulate(slow), lf = simulate(fast);
    ASSERT_EQ(ls.pair_sequence(), lf.pair_sequence());
    ASSERT_FALSE(ls.events.empty());
    for (std::size_t k = 0; k < ls.events.size(); ++k)
        EXPECT_NEAR(lf.events[k].t, ls.events[k].t / 2.0, 1e-9 * std::max(1.0, ls.events[k].t));
    const auto ns = normalize(ls).first, nf = normalize(lf).first;
    for (std::size_t k = 0; k < ls.events.size(); ++k)
        EXPECT_NEAR(ns.events[k].t, nf.events[k].t, 1e-9 * std::max(1.0, std::abs(ns.events[k].t)));
}

TEST(Normalize, ZeroEnergyIsRejected)
{
    auto still = simulate(make_state({{0, 0}, {5, 0}}, {{0, 0}, {0, 0}}));
    EXPECT_THROW(normalize(still), zero_energy_error);
}

TEST(FindT0, SinglePieceVertex)
{
    // Free flight only: x(t) = x0 + t v with the minimum at -x0.v / |v|^2.
    const double s = 1.0 / std::sqrt(2.0);
    auto log = simulate(make_state({{-3, 1}, {3, -1}}, {{0, -s}, {0, s}}));
    log.past_free_flight = !next_event(reversed(log.initial));
    ASSERT_TRUE(log.both_tails_certified());
    ASSERT_TRUE(log.events.empty());
    const auto p = find_t0(log);
    // x0.v = (1)(-s) + (-1)(s) = -2s, |v|^2 = 1.
    EXPECT_NEAR(p.t0, 2.0 * s, 1e-12);
    EXPECT_NEAR(p.x_norm, std::sqrt(18.0), 1e-12);
}

TEST(FindT0, HeadOnPairIsAtContact)
{
    const double s = 1.0 / std::sqrt(2.0);
    auto log = complete_log(make_state({{-3, 0}, {3, 0}}, {{s, 0}, {-s, 0}}));
    ASSERT_EQ(log.events.size(), 1u);
    const auto p = find_t0(log);
    EXPECT_NEAR(p.t0, log.events[0].t, 1e-12);
    EXPECT_NEAR(p.x_norm, std::sqrt(2.0), 1e-12);
}

TEST(FindT0, MatchesDenseSampling)
{
    for (auto kind : hardball::testing::all_kinds)
        for (std::uint64_t seed = 0; seed < 3; ++seed)
        {
            const auto log = normalize(seeded(kind, 6, 2, seed)).first;
            double t_sampled = 0.0;
            const double x_sampled = sampled_min_norm(log, &t_sampled);
            const auto p = find_t0(log);
            EXPECT_LE(p.x_norm, x_sampled + 1e-12);
            EXPECT_NEAR(p.x_norm, x_sampled, 1e-3 * x_sampled);
        }
}

TEST(FindT0, NeedsCertifiedTails)
{
    // Receding at the start: the backward tail has a collision, so the past is uncertified.
    auto log = simulate(make_state({{0, 0}, {6, 0}}, {{-1, 0}, {1, 0}}));
    EXPECT_THROW(find_t0(log), uncertified_tail_error);
}

TEST(AlphaProfile, AcuteAfterPivotObtuseBefore)
{
    const auto log = normalize(seeded(ScenarioKind::converging_cluster, 5, 2, 1)).first;
    const auto p = find_t0(log);
    Trajectory traj(log);
    const double last = traj.last_time(), first = log.events.empty() ? log.initial.t : log.events.front().t;
    const std::vector<double> times{first - 100.0, last + 100.0};
    const auto a = alpha_profile(traj, times);
    EXPECT_GT(a[0].alpha, std::numbers::pi / 2);
    EXPECT_LT(a[1].alpha, std::numbers::pi / 2);
    EXPECT_LE(times[0], p.t0);
}

TEST(SubfamilyFrame, WholeNormalizedLogIsIdentity)
{
    const auto log = normalize(seeded(ScenarioKind::random_box, 5, 2, 6)).first;
    std::vector<std::size_t> all{0, 1, 2, 3, 4};
    const auto f = subfamily_frame(log, all, -infinity, infinity);
    EXPECT_NEAR(f.speed, 1.0, 1e-12);
    EXPECT_FALSE(f.degenerate);
    for (std::size_t q = 0; q < log.initial.positions.size(); ++q)
        EXPECT_NEAR(f.log.initial.positions[q], log.initial.positions[q], 1e-9);
    EXPECT_EQ(f.log.pair_sequence(), log.pair_sequence());
}

TEST(SubfamilyFrame, SingleBallIsDegenerate)
{
    // Ball 2 never collides.
    auto log = complete_log(make_state({{-4, 0}, {4, 0}, {0, 30}}, {{1, 0.1}, {-1, 0.1}, {0.3, 1}}));
    const auto f = subfamily_frame(log, {2}, -infinity, infinity);
    EXPECT_TRUE(f.degenerate);
    EXPECT_EQ(f.speed, 0.0);
    for (double x : f.log.initial.positions)
        EXPECT_EQ(x, 0.0);
}

TEST(SubfamilyFrame, IsolatedPairStaysCentered)
{
    // Balls 0 and 1 meet head-on; ball 2 recedes and never touches them.
    auto log = complete_log(make_state({{-4, 0}, {4, 0}, {0, 30}}, {{1, 0.1}, {-1, 0.1}, {0, 1}}));
    ASSERT_EQ(log.events.size(), 1u);
    const auto f = subfamily_frame(log, {0, 1}, -infinity, infinity);
    Trajectory sub(f.log);
    for (int k = 0; k < 100; ++k)
    {
        const double t = -20.0 + 0.4 * k;
        const auto s = sub.state_at(t);
        for (double c : detail::mean_rows(s.positions, 2, 2))
            EXPECT_NEAR(c, 0.0, tol::num);
    }
    EXPECT_NEAR(f.speed, std::sqrt(2.0), 1e-12);
}

TEST(SubfamilyFrame, ExternalCollisionIsRejected)
{
    auto log = complete_log(make_state({{-4, 0}, {4, 0}, {12, 0}}, {{1, 0}, {0, 0}, {-0.5, 0}}));
    ASSERT_GE(log.events.size(), 2u);
    EXPECT_THROW(subfamily_frame(log, {0, 1}, -infinity, infinity), external_collision_error);
}
