#pragma once

#include "hardball/state.hpp"

#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace hardball
{
    using json = nlohmann::json;

    namespace detail
    {
        inline json rows(const SystemState &s, const std::vector<double> &flat)
        {
            json out = json::array();
            for (std::size_t i = 0; i < s.size(); ++i)
                out.push_back(std::vector<double>(flat.begin() + i * s.dim, flat.begin() + (i + 1) * s.dim));
            return out;
        }

        inline std::vector<double> flatten(const json &rows, std::size_t n, int d, const char *what)
        {
            if (!rows.is_array() || rows.size() != n)
                throw schema_error{std::string{"log header: '"} + what + "' must be an array of n vectors"};
            std::vector<double> flat;
            flat.reserve(n * d);
            for (const auto &r : rows)
            {
                if (!r.is_array() || r.size() != static_cast<std::size_t>(d))
                    throw schema_error{std::string{"log header: '"} + what + "' rows must have length d"};
                for (const auto &x : r)
                    flat.push_back(x.get<double>());
            }
            return flat;
        }

        inline std::vector<double> vec(const json &j, const char *key, int d)
        {
            const auto &v = j.at(key);
            if (!v.is_array() || v.size() != static_cast<std::size_t>(d))
                throw schema_error{std::string{"event field '"} + key + "' must have length d"};
            return v.get<std::vector<double>>();
        }
    } // namespace detail

    inline json header_json(const EventLog &log)
    {
        json h;
        h["format_version"] = log_format_version;
        h["n"] = log.size();
        h["d"] = log.dim();
        h["seed"] = log.header.seed;
        h["scenario"] = log.header.scenario;
        h["t0"] = log.initial.t;
        h["horizon"] = log.header.horizon ? json(*log.header.horizon) : json(nullptr);
        h["positions"] = detail::rows(log.initial, log.initial.positions);
        h["velocities"] = detail::rows(log.initial, log.initial.velocities);
        h["past"] = log.past_free_flight ? "free_flight" : "uncertified";
        return h;
    }

    inline json event_json(const CollisionEvent &e)
    {
        return json{{"t", e.t},           {"i", e.i},           {"j", e.j},
                    {"xi", e.xi},         {"xj", e.xj},         {"vi_pre", e.vi_pre},
                    {"vj_pre", e.vj_pre}, {"vi_post", e.vi_post}, {"vj_post", e.vj_post}};
    }

    /// JSON-lines: header, one line per event, trailer. Doubles are written in shortest
    /// round-trip form.
    inline void write_log(std::ostream &os, const EventLog &log)
    {
        os << header_json(log).dump() << '\n';
        for (const auto &e : log.events)
            os << event_json(e).dump() << '\n';
        os << json{{"terminated", to_string(log.terminated)}, {"event_count", log.events.size()}}.dump() << '\n';
    }

    inline std::string log_to_string(const EventLog &log)
    {
        std::ostringstream os;
        write_log(os, log);
        return os.str();
    }

    inline void write_log_file(const std::string &path, const EventLog &log)
    {
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw error{"cannot open '" + path + "' for writing"};
        write_log(os, log);
    }

    inline EventLog read_log(std::istream &is)
    {
        std::string line;
        if (!std::getline(is, line))
            throw schema_error{"log is empty"};
        EventLog log;
        json h;
        try
        {
            h = json::parse(line);
        }
        catch (const json::exception &ex)
        {
            throw schema_error{std::string{"log header is not JSON: "} + ex.what()};
        }
        try
        {
            if (h.at("format_version").get<int>() != log_format_version)
                throw schema_error{"unsupported log format_version"};
            const auto n = h.at("n").get<std::size_t>();
            const int d = h.at("d").get<int>();
            log.header.seed = h.at("seed").get<std::uint64_t>();
            log.header.scenario = h.at("scenario");
            if (!h.at("horizon").is_null())
                log.header.horizon = h.at("horizon").get<double>();
            log.initial.dim = d;
            log.initial.t = h.at("t0").get<double>();
            log.initial.positions = detail::flatten(h.at("positions"), n, d, "positions");
            log.initial.velocities = detail::flatten(h.at("velocities"), n, d, "velocities");
            log.past_free_flight = h.value("past", std::string{"uncertified"}) == "free_flight";

            bool trailer = false;
            while (std::getline(is, line))
            {
                if (line.empty())
                    continue;
                if (trailer)
                    throw schema_error{"log has content after the trailer"};
                json j = json::parse(line);
                if (j.contains("terminated"))
                {
                    log.terminated = termination_from_string(j.at("terminated").get<std::string>());
                    if (j.at("event_count").get<std::size_t>() != log.events.size())
                        throw schema_error{"trailer event_count does not match the number of events"};
                    trailer = true;
                    continue;
                }
                CollisionEvent e;
                e.t = j.at("t").get<double>();
                e.i = j.at("i").get<std::size_t>();
                e.j = j.at("j").get<std::size_t>();
                if (e.i >= e.j || e.j >= n)
                    throw schema_error{"event ball indices must satisfy i < j < n"};
                e.xi = detail::vec(j, "xi", d);
                e.xj = detail::vec(j, "xj", d);
                e.vi_pre = detail::vec(j, "vi_pre", d);
                e.vj_pre = detail::vec(j, "vj_pre", d);
                e.vi_post = detail::vec(j, "vi_post", d);
                e.vj_post = detail::vec(j, "vj_post", d);
                log.events.push_back(std::move(e));
            }
            if (!trailer)
                throw schema_error{"log is missing its trailer line"};
        }
        catch (const json::exception &ex)
        {
            throw schema_error{std::string{"malformed log: "} + ex.what()};
        }
        return log;
    }

    inline EventLog read_log_file(const std::string &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw error{"cannot open '" + path + "'"};
        return read_log(is);
    }

    inline EventLog log_from_string(const std::string &text)
    {
        std::istringstream is(text);
        return read_log(is);
    }

} // namespace hardball
