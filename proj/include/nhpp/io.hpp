#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "nhpp/error.hpp"
#include "nhpp/model.hpp"
#include "nhpp/period.hpp"

namespace nhpp::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
std::optional<T> parse_integer(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        return std::nullopt;
    }
    return value;
}

struct Row {
    std::size_t line = 0;
    int year = 0;
    std::int64_t count = 0;
};

inline std::vector<Row> read_rows(std::istream& in) {
    std::vector<Row> rows;
    std::string raw;
    std::size_t line = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = raw;
        if (line == 1 && s.starts_with("\xEF\xBB\xBF")) s.remove_prefix(3);
        s = trim(s);
        if (s.empty() || s.front() == '#') continue;
        if (!header_seen) {
            std::string header(s);
            for (char& c : header) {
                if (c == ' ' || c == '\t') c = '\0';
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            }
            std::erase(header, '\0');
            if (header != "year,count") {
                throw IngestError("expected header 'year,count', found '" + std::string(s) + "'", line);
            }
            header_seen = true;
            continue;
        }
        const auto comma = s.find(',');
        if (comma == std::string_view::npos || s.find(',', comma + 1) != std::string_view::npos) {
            throw IngestError("expected two fields 'year,count', found '" + std::string(s) + "'", line);
        }
        const auto year = parse_integer<int>(s.substr(0, comma));
        if (!year) {
            throw IngestError("year '" + std::string(trim(s.substr(0, comma))) + "' is not an integer", line);
        }
        const auto count_text = trim(s.substr(comma + 1));
        const auto count = parse_integer<std::int64_t>(count_text);
        if (!count) {
            throw IngestError("count '" + std::string(count_text) + "' for year " + std::to_string(*year) +
                                  " is not a nonnegative integer",
                              line);
        }
        if (*count < 0) {
            throw IngestError("count " + std::to_string(*count) + " for year " + std::to_string(*year) +
                                  " is negative",
                              line);
        }
        rows.push_back({line, *year, *count});
    }
    if (!header_seen) {
        throw IngestError("missing header 'year,count'", 0);
    }
    return rows;
}

}  // namespace detail

/// Parse an annual count table (header `year,count`, one row per year, LF
/// or CRLF, `#` comment lines ignored). Years must be contiguous and cover
/// exactly [start_year, end_year]; omitted bounds are taken from the file.
/// The resulting period is a = start_year, b = end_year + 1, unit bins.
inline CountSeries ingest(std::istream& in, std::optional<int> start_year = std::nullopt,
                          std::optional<int> end_year = std::nullopt, std::string label = {}) {
    const auto rows = detail::read_rows(in);
    if (rows.empty()) {
        throw IngestError("no data rows", 0);
    }
    const auto [lowest, highest] =
        std::minmax_element(rows.begin(), rows.end(), [](const detail::Row& a, const detail::Row& b) { return a.year < b.year; });
    const int first = start_year.value_or(lowest->year);
    const int last = end_year.value_or(highest->year);
    if (last <= first) {
        throw IngestError("start year " + std::to_string(first) + " must precede end year " + std::to_string(last),
                          0);
    }

    std::vector<std::int64_t> counts;
    counts.reserve(static_cast<std::size_t>(last - first + 1));
    int expected = first;
    for (const auto& row : rows) {
        if (row.year < first || row.year > last) {
            throw IngestError("year " + std::to_string(row.year) + " outside the requested range " +
                                  std::to_string(first) + "-" + std::to_string(last),
                              row.line);
        }
        if (row.year < expected) {
            throw IngestError("duplicate or out-of-order year " + std::to_string(row.year), row.line);
        }
        if (row.year > expected) {
            throw IngestError("missing year " + std::to_string(expected) + " (next row is " +
                                  std::to_string(row.year) + ")",
                              row.line);
        }
        counts.push_back(row.count);
        ++expected;
    }
    if (expected <= last) {
        throw IngestError("missing year " + std::to_string(expected) + " (file ends early)", 0);
    }
    return {StudyPeriod::annual(first, last), std::move(counts), std::move(label)};
}

inline CountSeries ingest(const std::filesystem::path& path, std::optional<int> start_year = std::nullopt,
                          std::optional<int> end_year = std::nullopt, std::string label = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError("cannot open " + path.string(), 0);
    }
    if (label.empty()) label = path.stem().string();
    return ingest(in, start_year, end_year, std::move(label));
}

/// First year of an annual series (a is the first calendar year).
inline int first_year(const CountSeries& series) { return static_cast<int>(series.period().start()); }

/// Serialize an annual series in the ingestion format.
inline std::string format_counts(const CountSeries& series, std::string_view comment_header = {}) {
    std::ostringstream out;
    out << comment_header;
    out << "year,count\n";
    const int first = first_year(series);
    for (std::size_t n = 0; n < series.size(); ++n) {
        out << first + static_cast<int>(n) << ',' << series[n] << '\n';
    }
    return out.str();
}

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Prefix every line of `text` with "# ".
inline std::string comment_block(std::string_view text) {
    std::string out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() || nl != std::string_view::npos) {
            out += "# ";
            out += line;
            out += '\n';
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

/// Write every file or none. Contents go to sibling temporaries first; then
/// each target is moved aside and replaced. If any step fails, replaced
/// targets are restored and the temporaries removed.
inline void write_all_or_nothing(const std::vector<std::pair<std::filesystem::path, std::string>>& files) {
    namespace fs = std::filesystem;
    auto sibling = [](const fs::path& p, const char* suffix) {
        auto out = p;
        out += suffix;
        return out;
    };
    std::vector<fs::path> temps;
    std::vector<std::pair<fs::path, bool>> committed;  // target, had a previous version
    auto roll_back = [&] {
        std::error_code ec;
        for (auto it = committed.rbegin(); it != committed.rend(); ++it) {
            fs::remove(it->first, ec);
            if (it->second) fs::rename(sibling(it->first, ".bak"), it->first, ec);
        }
        for (const auto& t : temps) fs::remove(t, ec);
    };
    try {
        for (const auto& [path, content] : files) {
            if (path.has_parent_path()) {
                fs::create_directories(path.parent_path());
            }
            temps.push_back(sibling(path, ".tmp"));
            std::ofstream out(temps.back(), std::ios::binary | std::ios::trunc);
            out << content;
            out.close();
            if (!out) {
                throw Error("failed to write " + temps.back().string());
            }
        }
        for (std::size_t i = 0; i < files.size(); ++i) {
            const fs::path& target = files[i].first;
            if (fs::is_directory(target)) {
                throw Error("output path " + target.string() + " is a directory");
            }
            const bool existed = fs::exists(target);
            if (existed) fs::rename(target, sibling(target, ".bak"));
            committed.emplace_back(target, existed);
            fs::rename(temps[i], target);
        }
    } catch (const fs::filesystem_error& e) {
        roll_back();
        throw Error(std::string("file output failed: ") + e.what());
    } catch (...) {
        roll_back();
        throw;
    }
    std::error_code ec;
    for (const auto& [target, existed] : committed) {
        if (existed) fs::remove(sibling(target, ".bak"), ec);
    }
}

}  // namespace nhpp::io
