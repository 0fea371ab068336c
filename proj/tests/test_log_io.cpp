#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace hardball;
using hardball::testing::make_state;

namespace
{
    EventLog sample_log()
    {
        return hardball::testing::complete_run(hardball::testing::spec(ScenarioKind::random_box, 6, 3, 21));
    }

    std::vector<std::string> lines_of(const std::string &text)
    {
        std::vector<std::string> out;
        std::istringstream is(text);
        for (std::string l; std::getline(is, l);)
            out.push_back(l);
        return out;
    }

    std::string join(const std::vector<std::string> &lines)
    {
        std::string s;
        for (const auto &l : lines)
            s += l + '\n';
        return s;
    }
} // namespace

TEST(LogIo, RoundTripIsExact)
{
    const auto log = sample_log();
    const auto text = log_to_string(log);
    const auto back = log_from_string(text);
    EXPECT_EQ(back.initial.positions, log.initial.positions);
    EXPECT_EQ(back.initial.velocities, log.initial.velocities);
    EXPECT_EQ(back.initial.t, log.initial.t);
    ASSERT_EQ(back.events.size(), log.events.size());
    for (std::size_t k = 0; k < log.events.size(); ++k)
    {
        EXPECT_EQ(back.events[k].t, log.events[k].t);
        EXPECT_EQ(back.events[k].vi_post, log.events[k].vi_post);
    }
    EXPECT_EQ(back.terminated, log.terminated);
    EXPECT_EQ(back.past_free_flight, log.past_free_flight);
    EXPECT_EQ(back.header.seed, log.header.seed);
    EXPECT_EQ(back.header.scenario, log.header.scenario);
    EXPECT_EQ(log_to_string(back), text);
}

TEST(LogIo, LayoutIsHeaderEventsTrailer)
{
    const auto log = sample_log();
    const auto lines = lines_of(log_to_string(log));
    ASSERT_EQ(lines.size(), log.events.size() + 2);
    const auto header = json::parse(lines.front());
    for (const char *key : {"format_version", "n", "d", "seed", "scenario", "t0", "horizon", "positions", "velocities", "past"})
        EXPECT_TRUE(header.contains(key)) << key;
    const auto trailer = json::parse(lines.back());
    EXPECT_EQ(trailer.at("terminated"), "free_flight");
    EXPECT_EQ(trailer.at("event_count").get<std::size_t>(), log.events.size());
}

TEST(LogIo, SchemaErrors)
{
    const auto lines = lines_of(log_to_string(sample_log()));
    ASSERT_GE(lines.size(), 3u);

    EXPECT_THROW(log_from_string(""), schema_error);
    EXPECT_THROW(log_from_string("not json\n"), schema_error);

    auto no_trailer = lines;
    no_trailer.pop_back();
    EXPECT_THROW(log_from_string(join(no_trailer)), schema_error);

    auto wrong_count = lines;
    auto tr = json::parse(wrong_count.back());
    tr["event_count"] = 99999;
    wrong_count.back() = tr.dump();
    EXPECT_THROW(log_from_string(join(wrong_count)), schema_error);

    auto bad_index = lines;
    auto ev = json::parse(bad_index[1]);
    ev["j"] = 1000;
    bad_index[1] = ev.dump();
    EXPECT_THROW(log_from_string(join(bad_index)), schema_error);

    auto short_vec = lines;
    ev = json::parse(short_vec[1]);
    ev["xi"] = {1.0};
    short_vec[1] = ev.dump();
    EXPECT_THROW(log_from_string(join(short_vec)), schema_error);

    auto bad_version = lines;
    auto h = json::parse(bad_version[0]);
    h["format_version"] = 999;
    bad_version[0] = h.dump();
    EXPECT_THROW(log_from_string(join(bad_version)), schema_error);

    auto missing = lines;
    h = json::parse(missing[0]);
    h.erase("positions");
    missing[0] = h.dump();
    EXPECT_THROW(log_from_string(join(missing)), schema_error);

    auto extra = lines;
    extra.push_back(extra[1]);
    EXPECT_THROW(log_from_string(join(extra)), schema_error);
}

TEST(LogIo, UncertifiedPastIsPreserved)
{
    auto log = simulate(make_state({{0, 0}, {6, 0}}, {{-1, 0}, {1, 0}}));
    EXPECT_FALSE(log.past_free_flight);
    EXPECT_FALSE(log_from_string(log_to_string(log)).past_free_flight);
}
