#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tsnorm/error.hpp"
#include "tsnorm/series.hpp"

namespace tsnorm {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc{} || res.ptr != last) return false;
    return std::isfinite(out); // "nan"/"inf" cells are parse errors, not data
}

inline bool is_timestamp_header(const std::string& name) {
    std::string lower = trim(name);
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lower.empty() || lower == "date" || lower == "time" || lower == "timestamp" ||
           lower == "datetime" || lower == "index" || lower == "idx";
}

} // namespace detail

// Load a T x C series from CSV. The header row names the channels; an
// optional leading timestamp column is recognized by its header name (date,
// time, timestamp, datetime, index, idx or empty) or by a non-numeric first
// data cell. Any non-numeric cell in a value column fails the load with its
// file line and field position; line numbers are 1-based and count the
// header.
inline SeriesMatrix load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Error::Code::FileNotFound, "cannot open " + path.string());
    }

    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (!detail::trim(line).empty()) rows.push_back(line);
    }
    if (rows.size() < 2) {
        throw Error(Error::Code::EmptySeries, path.string() + ": no data rows");
    }

    std::vector<std::string> header = detail::split_csv_line(rows[0]);
    if (header.empty()) {
        throw Error(Error::Code::EmptySeries, path.string() + ": empty header");
    }

    bool has_timestamp = detail::is_timestamp_header(header[0]);
    if (!has_timestamp) {
        const auto first = detail::split_csv_line(rows[1]);
        double v;
        if (!first.empty() && !detail::parse_double(first[0], v)) has_timestamp = true;
    }

    const std::size_t first_value_col = has_timestamp ? 1 : 0;
    if (header.size() <= first_value_col) {
        throw Error(Error::Code::EmptySeries, path.string() + ": no value columns");
    }
    const std::size_t channels = header.size() - first_value_col;

    SeriesMatrix series;
    for (std::size_t c = 0; c < channels; ++c) {
        series.channel_names.push_back(detail::trim(header[first_value_col + c]));
    }

    const std::size_t n_rows = rows.size() - 1;
    series.values = Matrix(n_rows, channels);
    if (has_timestamp) series.timestamps.reserve(n_rows);

    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t file_line = r + 2; // header is line 1
        const auto fields = detail::split_csv_line(rows[r + 1]);
        if (fields.size() != header.size()) {
            throw ParseError(file_line, fields.size() + 1,
                             path.string() + ": line " + std::to_string(file_line) + " has " +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(header.size()));
        }
        if (has_timestamp) series.timestamps.push_back(detail::trim(fields[0]));
        for (std::size_t c = 0; c < channels; ++c) {
            double v;
            if (!detail::parse_double(fields[first_value_col + c], v)) {
                throw ParseError(file_line, first_value_col + c + 1,
                                 path.string() + ": non-numeric cell at line " +
                                     std::to_string(file_line) + ", column " +
                                     std::to_string(first_value_col + c + 1) + " (\"" +
                                     detail::trim(fields[first_value_col + c]) + "\")");
            }
            series.values(r, c) = v;
        }
    }
    return series;
}

inline void save_csv(const SeriesMatrix& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(Error::Code::Config, "cannot open " + path.string() + " for writing");
    }
    const bool with_timestamps = !series.timestamps.empty();
    if (with_timestamps) out << "timestamp,";
    for (std::size_t c = 0; c < series.channels(); ++c) {
        out << series.channel_names[c];
        out << (c + 1 < series.channels() ? ',' : '\n');
    }
    char buf[64];
    for (std::size_t r = 0; r < series.length(); ++r) {
        if (with_timestamps) out << series.timestamps[r] << ',';
        for (std::size_t c = 0; c < series.channels(); ++c) {
            const auto res =
                std::to_chars(buf, buf + sizeof(buf), series.values(r, c),
                              std::chars_format::general, 17);
            out.write(buf, res.ptr - buf);
            out.put(c + 1 < series.channels() ? ',' : '\n');
        }
    }
}

} // namespace tsnorm
